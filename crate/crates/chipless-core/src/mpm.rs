//! Matrix Pencil Method: complex-pole estimation from uniform time
//! samples, plus the normalized decoding error used to score estimates.
//!
//! For samples `x_k = Σ_i R_i z_i^k`, `z_i = e^{−s_i·dt}`, the Hankel
//! matrix `Y[k][i] = x[k+i]` (pencil split `L`) has row space spanned by
//! the conjugated Vandermonde directions of the `z_i`. The estimator:
//!
//! 1. forms the Gram matrix `Yᴴ·Y` (cheap via the Hankel structure),
//! 2. takes its leading eigenvectors — the right singular directions of
//!    `Y` — keeping either a fixed count `M` or every direction whose
//!    singular value is at least `τ·σ_max`,
//! 3. solves the pencil `V₁⁺·V₂` (drop last/first row of the retained
//!    directions) whose eigenvalues are the `z̄_i`,
//! 4. maps `s_i = −ln(z_i)/dt` and fits residues by least squares on the
//!    Vandermonde system.
//!
//! Fixed-order mode uses Lanczos iteration for the leading eigenpairs
//! (fast enough for Monte-Carlo trials); threshold mode decomposes the
//! Gram matrix fully. Singular values below `n·ε·σ_max` are reported as
//! zero — they are rounding noise, and the true values at exact rank are
//! zero.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat};
use crate::sem::{Pole, TimeSignal};

/// How many singular directions to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSelection {
    /// Fixed model order, for studies where the true order is known.
    Fixed(usize),
    /// Keep every direction with `σ_k ≥ τ·σ_max`, `0 < τ < 1`.
    Threshold(f64),
}

/// Estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpmConfig {
    /// Hankel pencil split `L`; `None` picks `n_samples/3`, the usual
    /// noise-performance sweet spot in `[N/3, N/2]`.
    #[serde(default)]
    pub pencil_param: Option<usize>,
    pub order: OrderSelection,
}

impl MpmConfig {
    pub fn fixed(m: usize) -> Self {
        Self { pencil_param: None, order: OrderSelection::Fixed(m) }
    }

    pub fn threshold(tau: f64) -> Self {
        Self { pencil_param: None, order: OrderSelection::Threshold(tau) }
    }
}

impl Default for MpmConfig {
    fn default() -> Self {
        Self::threshold(1e-3)
    }
}

/// One estimated resonance. Unlike [`Pole`], `alpha` may be zero or
/// negative: noise can push an estimate across the stability boundary
/// and such poles are reported, not hidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedPole {
    pub alpha: f64,
    pub omega: f64,
    pub residue: Complex64,
}

impl EstimatedPole {
    /// The complex pole `s = α + jω`.
    pub fn s(&self) -> Complex64 {
        Complex64::new(self.alpha, self.omega)
    }
}

#[derive(Serialize, Deserialize)]
struct EstimatedPoleWire {
    alpha: f64,
    omega: f64,
    residue_re: f64,
    residue_im: f64,
}

impl Serialize for EstimatedPole {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        EstimatedPoleWire {
            alpha: self.alpha,
            omega: self.omega,
            residue_re: self.residue.re,
            residue_im: self.residue.im,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for EstimatedPole {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let w = EstimatedPoleWire::deserialize(de)?;
        Ok(EstimatedPole {
            alpha: w.alpha,
            omega: w.omega,
            residue: Complex64::new(w.residue_re, w.residue_im),
        })
    }
}

/// Result of one pole estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleEstimate {
    /// Estimated poles, sorted by ascending `ω`.
    pub poles: Vec<EstimatedPole>,
    pub order_used: usize,
    /// Leading singular values of the Hankel data matrix, descending.
    pub singular_values: Vec<f64>,
    /// The residue fit hit a Vandermonde condition number above 1e12;
    /// treat the residues (not the poles) with suspicion.
    #[serde(default)]
    pub ill_conditioned: bool,
}

impl PoleEstimate {
    fn empty() -> Self {
        PoleEstimate {
            poles: Vec::new(),
            order_used: 0,
            singular_values: Vec::new(),
            ill_conditioned: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MpmError {
    InvalidConfig(&'static str),
    /// `n_samples` does not leave room for the requested order.
    TooFewSamples,
    /// The QR eigenvalue iteration failed to converge.
    EigenFailure,
    /// `mpm_error` needs at least one true pole.
    EmptyTruth,
}

impl fmt::Display for MpmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MpmError::InvalidConfig(m) => write!(f, "invalid MPM config: {m}"),
            MpmError::TooFewSamples => write!(f, "too few samples for requested order"),
            MpmError::EigenFailure => write!(f, "pencil eigenvalue iteration failed"),
            MpmError::EmptyTruth => write!(f, "true pole list is empty"),
        }
    }
}

impl core::error::Error for MpmError {}

const COND_CAP: f64 = 1e12;

/// Estimate complex poles from time samples.
pub fn estimate_poles(ts: &TimeSignal, cfg: &MpmConfig) -> Result<PoleEstimate, MpmError> {
    let n = ts.samples.len();
    let dt = ts.grid.dt();

    match cfg.order {
        OrderSelection::Fixed(m) => {
            if m == 0 {
                return Err(MpmError::InvalidConfig("fixed order must be >= 1"));
            }
            if n < 2 * m + 1 {
                return Err(MpmError::TooFewSamples);
            }
        }
        OrderSelection::Threshold(tau) => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(MpmError::InvalidConfig("threshold must be in (0, 1)"));
            }
        }
    }

    if ts.samples.iter().all(|v| v.norm_sqr() == 0.0) {
        return Ok(PoleEstimate::empty());
    }

    let l = cfg.pencil_param.unwrap_or(n / 3).clamp(1, n - 1);
    if let OrderSelection::Fixed(m) = cfg.order {
        if l < m || l > n - m {
            return Err(MpmError::InvalidConfig("need order <= pencil_param <= n - order"));
        }
    }

    let gram = linalg::hankel_gram(&ts.samples, l);
    let cols = l + 1;

    // eigenvalues (descending) and the retained directions
    let (lambda, vm, m) = match cfg.order {
        OrderSelection::Fixed(m) => {
            let steps = cols.min((2 * m + 16).max(48));
            let out = linalg::lanczos_top(&gram, m, steps);
            let got = out.vectors.cols.min(m);
            (out.values, out.vectors, got)
        }
        OrderSelection::Threshold(tau) => {
            let (vals, vecs) = linalg::hermitian_eig(&gram);
            let sig_max = vals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
            let cut = tau * sig_max;
            let mut m = vals.iter().take_while(|&&v| v.max(0.0).sqrt() >= cut).count();
            m = m.clamp(1, l.min(n - l));
            (vals, vecs, m)
        }
    };

    let singular_values = clamp_singular_values(&lambda, cols);
    if m == 0 || singular_values.first().copied().unwrap_or(0.0) == 0.0 {
        return Ok(PoleEstimate { singular_values, ..PoleEstimate::empty() });
    }

    // pencil: columns of Vm are (cols)-long; V1 drops the last row,
    // V2 the first. Eigenvalues of V1+ V2 are conj(z_i).
    let rows = cols - 1;
    let mut v1 = CMat::zeros(rows, m);
    let mut v2 = CMat::zeros(rows, m);
    for i in 0..rows {
        for j in 0..m {
            *v1.at_mut(i, j) = vm.at(i, j);
            *v2.at_mut(i, j) = vm.at(i + 1, j);
        }
    }
    let mut pencil = CMat::zeros(m, m);
    for j in 0..m {
        let rhs = v2.column(j);
        let (col, _) = linalg::lstsq_qr(&v1, &rhs);
        for i in 0..m {
            *pencil.at_mut(i, j) = col[i];
        }
    }
    let zbars = linalg::complex_eigenvalues(&pencil).map_err(|_| MpmError::EigenFailure)?;

    let zs: Vec<Complex64> = zbars
        .into_iter()
        .map(|zb| zb.conj())
        .filter(|z| z.norm() > 1e-300 && z.re.is_finite() && z.im.is_finite())
        .collect();

    // s = -ln(z)/dt
    let ss: Vec<Complex64> = zs.iter().map(|z| -(z.ln()) / dt).collect();

    let (residues, cond) = fit_residues(&ts.samples, &zs);
    let ill_conditioned = !cond.is_finite() || cond > COND_CAP;

    let mut poles: Vec<EstimatedPole> = ss
        .iter()
        .zip(&residues)
        .map(|(s, r)| EstimatedPole { alpha: s.re, omega: s.im, residue: *r })
        .collect();
    poles.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    let order_used = poles.len();

    Ok(PoleEstimate { poles, order_used, singular_values, ill_conditioned })
}

/// σ_k = sqrt(λ_k), with eigenvalues below the numerical-rank floor
/// `cols·ε·λ_max` reported as exactly zero.
fn clamp_singular_values(lambda: &[f64], cols: usize) -> Vec<f64> {
    let lam_max = lambda.first().copied().unwrap_or(0.0).max(0.0);
    let floor = cols as f64 * linalg::EPS * lam_max;
    lambda.iter().map(|&lam| if lam <= floor { 0.0 } else { lam.sqrt() }).collect()
}

/// Least-squares residues for `x_k ≈ Σ_i R_i z_i^k`, with per-column
/// scaling so growing (unstable) junk poles cannot overflow the
/// Vandermonde entries.
fn fit_residues(x: &[Complex64], zs: &[Complex64]) -> (Vec<Complex64>, f64) {
    let n = x.len();
    let m = zs.len();
    if m == 0 {
        return (Vec::new(), 1.0);
    }
    let mut vand = CMat::zeros(n, m);
    let mut scale = vec![0.0f64; m];
    for (j, z) in zs.iter().enumerate() {
        let ln_mag = z.norm().ln();
        let theta = z.arg();
        // columns with |z| > 1 are scaled down by |z|^{n-1}
        let shift = if ln_mag > 0.0 { (n - 1) as f64 * ln_mag } else { 0.0 };
        scale[j] = shift;
        for k in 0..n {
            let mag = (k as f64 * ln_mag - shift).exp();
            *vand.at_mut(k, j) = Complex64::from_polar(mag, k as f64 * theta);
        }
    }
    let (raw, cond) = linalg::lstsq_qr(&vand, x);
    let residues = raw.iter().zip(&scale).map(|(r, &shift)| r * (-shift).exp()).collect();
    (residues, cond)
}

/// Normalized decoding error between true and estimated poles.
///
/// True poles (taken in ascending-`ω` order) greedily match the nearest
/// unused estimate in `|s − ŝ|`; when estimates run out the remaining
/// true poles pair with the zero pole. Estimated poles beyond the true
/// count are ignored. Returns `Σ|s_i − ŝ_i| / Σ|s_i|`.
pub fn mpm_error(truth: &[Pole], est: &PoleEstimate) -> Result<f64, MpmError> {
    if truth.is_empty() {
        return Err(MpmError::EmptyTruth);
    }
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&i, &j| truth[i].omega().total_cmp(&truth[j].omega()));

    let mut pool: Vec<Complex64> = est.poles.iter().map(|p| p.s()).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &order {
        let s = truth[i].s();
        den += s.norm();
        if pool.is_empty() {
            num += s.norm();
            continue;
        }
        let (jmin, _) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| (s - a.1).norm().total_cmp(&(s - b.1).norm()))
            .expect("pool non-empty");
        num += (s - pool.swap_remove(jmin)).norm();
    }
    Ok(num / den)
}
