//! Reader-side noise: per-bin AWGN at a target SNR and bounded uniform
//! phase jitter, both seed-deterministic.
//!
//! [`apply_channel`] composes the two in a fixed order: AWGN first, then
//! the phase rotation. Rotating last means the magnitude spectrum of the
//! noisy measurement is exactly the AWGN-only one, bin for bin — phase
//! jitter is invisible to any consumer that reads only `|value|`, while
//! consumers that need the complex samples see the full corruption.
//!
//! Independent trials must not share RNG streams; derive one seed per
//! trial with [`derive_seed`] and let the two noise processes split
//! their own sub-streams from it.

use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::sem::Spectrum;

/// Noise settings for one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Signal-to-noise ratio in dB; `None` disables AWGN.
    pub snr_db: Option<f64>,
    /// Half-width of the uniform per-bin phase perturbation, degrees.
    #[serde(default)]
    pub phase_noise_deg: f64,
    /// Seed for this observation's noise streams.
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(ChannelError::InvalidConfig("snr_db must be finite"));
            }
        }
        if !(self.phase_noise_deg >= 0.0 && self.phase_noise_deg.is_finite()) {
            return Err(ChannelError::InvalidConfig("phase_noise_deg must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelError {
    InvalidConfig(&'static str),
    /// `apply_awgn` called without an SNR; the noiseless path is simply
    /// not calling it.
    SnrMissing,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::InvalidConfig(m) => write!(f, "invalid channel config: {m}"),
            ChannelError::SnrMissing => write!(f, "apply_awgn needs snr_db"),
        }
    }
}

impl core::error::Error for ChannelError {}

/// Domain tags for sub-stream derivation.
const DOMAIN_AWGN: u64 = 1;
const DOMAIN_PHASE: u64 = 2;

/// One step of the splitmix64 sequence.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed derivation: hash of `(master, a, b)`.
///
/// Used for per-trial seeds in Monte-Carlo sweeps (`a` = grid index,
/// `b` = trial index) and for per-observation seeds in scenario runs, so
/// results are independent of execution order and parallelism.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b)
}

/// Add independent complex Gaussian noise per bin.
///
/// The noise variance is `mean(|value|²) / 10^(snr_db/10)` with the mean
/// taken over the bins of `sp`; real and imaginary parts are independent
/// with variance `σ²/2` each. Deterministic given `cfg.seed`.
pub fn apply_awgn(sp: &Spectrum, cfg: &ChannelConfig) -> Result<Spectrum, ChannelError> {
    cfg.validate()?;
    let snr_db = cfg.snr_db.ok_or(ChannelError::SnrMissing)?;
    let var = sp.mean_power() / 10.0_f64.powf(snr_db / 10.0);
    let sigma = (var / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, DOMAIN_AWGN, 0));
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let values: Vec<Complex64> = sp
        .values
        .iter()
        .map(|v| {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            v + Complex64::new(re, im)
        })
        .collect();
    Ok(Spectrum { freqs: sp.freqs.clone(), values })
}

/// Rotate each bin by an independent uniform phase in
/// `[-phase_noise_deg, +phase_noise_deg]`.
///
/// Per-bin magnitudes are preserved (unit-modulus multiplier);
/// deterministic given `cfg.seed`. Zero half-width is the identity.
pub fn apply_phase_noise(sp: &Spectrum, cfg: &ChannelConfig) -> Spectrum {
    if cfg.phase_noise_deg <= 0.0 {
        return sp.clone();
    }
    let half = cfg.phase_noise_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, DOMAIN_PHASE, 0));
    let dist = Uniform::new_inclusive(-half, half);
    let values: Vec<Complex64> = sp
        .values
        .iter()
        .map(|v| v * Complex64::from_polar(1.0, dist.sample(&mut rng)))
        .collect();
    Spectrum { freqs: sp.freqs.clone(), values }
}

/// Apply the full channel: AWGN (when `snr_db` is set), then phase
/// jitter (when the half-width is positive). Fixed composition order.
pub fn apply_channel(sp: &Spectrum, cfg: &ChannelConfig) -> Result<Spectrum, ChannelError> {
    cfg.validate()?;
    let noisy = if cfg.snr_db.is_some() { apply_awgn(sp, cfg)? } else { sp.clone() };
    Ok(apply_phase_noise(&noisy, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sem::Spectrum;
    use alloc::vec::Vec;

    fn unit_spectrum(n: usize) -> Spectrum {
        let freqs: Vec<f64> = (0..n).map(|k| 1e6 * (k + 1) as f64).collect();
        let values = alloc::vec![Complex64::new(1.0, 0.0); n];
        Spectrum::new(freqs, values).unwrap()
    }

    #[test]
    fn awgn_requires_snr() {
        let sp = unit_spectrum(32);
        let cfg = ChannelConfig { snr_db: None, phase_noise_deg: 0.0, seed: 1 };
        assert_eq!(apply_awgn(&sp, &cfg).unwrap_err(), ChannelError::SnrMissing);
    }

    #[test]
    fn awgn_is_deterministic_per_seed() {
        let sp = unit_spectrum(256);
        let cfg = ChannelConfig { snr_db: Some(10.0), phase_noise_deg: 0.0, seed: 42 };
        let a = apply_awgn(&sp, &cfg).unwrap();
        let b = apply_awgn(&sp, &cfg).unwrap();
        assert_eq!(a, b);
        let cfg2 = ChannelConfig { seed: 43, ..cfg };
        assert_ne!(a, apply_awgn(&sp, &cfg2).unwrap());
    }

    #[test]
    fn awgn_power_matches_snr_definition() {
        // snr 20 dB on a unit-power spectrum: noise power 0.01 +/- 5%
        let n = 20_000;
        let sp = unit_spectrum(n);
        let cfg = ChannelConfig { snr_db: Some(20.0), phase_noise_deg: 0.0, seed: 7 };
        let noisy = apply_awgn(&sp, &cfg).unwrap();
        let p: f64 = noisy
            .values
            .iter()
            .zip(&sp.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((p - 0.01).abs() <= 0.0005, "noise power {p}");
    }

    #[test]
    fn zero_phase_noise_is_identity() {
        let sp = unit_spectrum(64);
        let cfg = ChannelConfig { snr_db: None, phase_noise_deg: 0.0, seed: 5 };
        assert_eq!(apply_phase_noise(&sp, &cfg), sp);
    }

    #[test]
    fn phase_noise_preserves_magnitudes() {
        let n = 4096;
        let freqs: Vec<f64> = (0..n).map(|k| 1e6 * (k + 1) as f64).collect();
        let values: Vec<Complex64> =
            (0..n).map(|k| Complex64::new(0.25 + k as f64, 1.5 - k as f64 / 7.0)).collect();
        let sp = Spectrum::new(freqs, values).unwrap();
        let cfg = ChannelConfig { snr_db: None, phase_noise_deg: 15.0, seed: 11 };
        let out = apply_phase_noise(&sp, &cfg);
        for (a, b) in out.values.iter().zip(&sp.values) {
            let rel = (a.norm() - b.norm()).abs() / b.norm();
            assert!(rel <= 4.0 * f64::EPSILON, "magnitude drifted by {rel}");
        }
    }

    #[test]
    fn phase_noise_stats_match_uniform_law() {
        // half-width 1 degree: max |theta| <= 1 deg, mean |theta| ~ 0.5 deg
        let n = 50_000;
        let sp = unit_spectrum(n);
        let cfg = ChannelConfig { snr_db: None, phase_noise_deg: 1.0, seed: 3 };
        let out = apply_phase_noise(&sp, &cfg);
        let mut max_deg: f64 = 0.0;
        let mut sum_deg = 0.0;
        for (a, b) in out.values.iter().zip(&sp.values) {
            let theta = (a / b).arg().to_degrees().abs();
            max_deg = max_deg.max(theta);
            sum_deg += theta;
        }
        let mean = sum_deg / n as f64;
        assert!(max_deg <= 1.0 + 1e-9, "max {max_deg}");
        assert!((mean - 0.5).abs() <= 0.025, "mean {mean}");
    }

    #[test]
    fn channel_composes_awgn_then_phase() {
        let sp = unit_spectrum(128);
        let cfg = ChannelConfig { snr_db: Some(15.0), phase_noise_deg: 2.0, seed: 9 };
        let combined = apply_channel(&sp, &cfg).unwrap();
        let manual = apply_phase_noise(&apply_awgn(&sp, &cfg).unwrap(), &cfg);
        assert_eq!(combined, manual);
    }

    #[test]
    fn derive_seed_separates_streams() {
        let s = derive_seed(123, 0, 0);
        assert_ne!(s, derive_seed(123, 0, 1));
        assert_ne!(s, derive_seed(123, 1, 0));
        assert_ne!(s, derive_seed(124, 0, 0));
        assert_eq!(s, derive_seed(123, 0, 0));
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig { snr_db: Some(f64::NAN), phase_noise_deg: 0.0, seed: 0 }
            .validate()
            .is_err());
        assert!(ChannelConfig { snr_db: None, phase_noise_deg: -1.0, seed: 0 }
            .validate()
            .is_err());
        assert!(ChannelConfig { snr_db: Some(10.0), phase_noise_deg: 1.0, seed: 0 }
            .validate()
            .is_ok());
    }
}
