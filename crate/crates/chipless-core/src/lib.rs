//! Core algorithms for chipless-RFID backscatter simulation and decoding.
//!
//! A chipless tag's scattered field is modeled as a sum of damped complex
//! exponentials (one term per resonance). This crate synthesizes such
//! signals in the time and frequency domains, corrupts them with the two
//! noise processes of a swept-frequency reader (additive white Gaussian
//! noise and per-bin phase jitter), and decodes them with two rival
//! methods:
//!
//! * [`mpm`] — the Matrix Pencil Method, which estimates the complex poles
//!   from uniformly sampled time data via an SVD-filtered pencil
//!   eigenproblem. Needs both amplitude and phase.
//! * [`pra`] — a pattern recognition approach that reduces the magnitude
//!   spectrum to a notch feature pattern (frequency, width, depth) and
//!   matches it against templates by weighted Euclidean distance. Phase
//!   never enters.
//!
//! On top of the decoders sit [`events`] (tag state classification and a
//! debounced open/close event stream) and [`emar`] (a medication
//! administration record with missed-dose and double-dose rules plus an
//! alert sink abstraction).
//!
//! The crate is `no_std` + `alloc`; every operation is a pure function of
//! its inputs and a seed, so Monte-Carlo trials parallelize trivially.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod channel;
pub mod emar;
pub mod events;
mod linalg;
pub mod mpm;
pub mod pra;
pub mod sem;

pub use num_complex::Complex64;
