//! Pattern recognition decoding: notch feature extraction from a
//! magnitude spectrum and nearest-template classification.
//!
//! Only `|value|` is ever read, so this decoder is blind to any phase
//! corruption. The feature pattern holds one `(f, w, d)` triple per
//! spectral extremum: interpolated center frequency, width at a fixed
//! level below the crest, and prominence in dB.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::sem::Spectrum;

/// One spectral feature: center frequency, width, depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Notch {
    pub f_hz: f64,
    pub w_hz: f64,
    pub d_db: f64,
}

/// An ordered list of notches, the feature vector of one tag state.
#[derive(Debug, Clone, PartialEq)]
pub struct NotchPattern {
    notches: Vec<Notch>,
}

impl Serialize for NotchPattern {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.notches.serialize(ser)
    }
}

impl NotchPattern {
    /// Build a pattern; frequencies must be strictly increasing with
    /// positive widths and depths.
    pub fn new(notches: Vec<Notch>) -> Result<Self, PraError> {
        for n in &notches {
            if !(n.f_hz.is_finite() && n.w_hz > 0.0 && n.d_db > 0.0) {
                return Err(PraError::InvalidPattern("need finite f, w > 0, d > 0"));
            }
        }
        for pair in notches.windows(2) {
            if pair[1].f_hz <= pair[0].f_hz {
                return Err(PraError::InvalidPattern("notch frequencies must increase"));
            }
        }
        Ok(Self { notches })
    }

    pub fn empty() -> Self {
        Self { notches: Vec::new() }
    }

    pub fn notches(&self) -> &[Notch] {
        &self.notches
    }

    pub fn len(&self) -> usize {
        self.notches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notches.is_empty()
    }
}

impl<'de> Deserialize<'de> for NotchPattern {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let notches = Vec::<Notch>::deserialize(de)?;
        NotchPattern::new(notches).map_err(D::Error::custom)
    }
}

/// Whether features are crests or dips of the magnitude in dB.
///
/// Synthetic pole-sum spectra produce crests; measured hardware traces
/// may show the resonances as dips instead, so the polarity is a
/// configuration choice rather than a guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Peak,
    Dip,
}

/// Feature-extraction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Minimum prominence (dB) for an extremum to count.
    pub prominence_floor_db: f64,
    /// Level below the crest at which the width is measured (dB).
    pub width_level_db: f64,
    /// Analysis band `(f_lo, f_hi)` in Hz.
    pub band: (f64, f64),
    pub polarity: Polarity,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            prominence_floor_db: 6.0,
            width_level_db: 3.0,
            band: (0.1e9, 5.0e9),
            polarity: Polarity::Peak,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), PraError> {
        if !(self.prominence_floor_db > 0.0) {
            return Err(PraError::InvalidConfig("prominence floor must be > 0"));
        }
        if !(self.width_level_db > 0.0) {
            return Err(PraError::InvalidConfig("width level must be > 0"));
        }
        if !(self.band.0 < self.band.1) {
            return Err(PraError::InvalidConfig("band must satisfy f_lo < f_hi"));
        }
        Ok(())
    }
}

/// Weights and scales for the feature-space Euclidean distance.
///
/// The raw features mix Hz and dB, so each axis is normalized before
/// squaring: frequency by `f_scale_hz`, width by `w_scale_hz`, depth by
/// `d_scale_db`. Unmatched notches cost `miss_penalty` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceWeights {
    pub w_f: f64,
    pub w_w: f64,
    pub w_d: f64,
    pub f_scale_hz: f64,
    pub w_scale_hz: f64,
    pub d_scale_db: f64,
    pub miss_penalty: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            w_f: 1.0,
            w_w: 1.0,
            w_d: 1.0,
            f_scale_hz: 1.0e9,
            w_scale_hz: 0.1e9,
            d_scale_db: 10.0,
            miss_penalty: 10.0,
        }
    }
}

impl DistanceWeights {
    pub fn validate(&self) -> Result<(), PraError> {
        let ws = [self.w_f, self.w_w, self.w_d];
        if ws.iter().any(|w| *w < 0.0) || ws.iter().all(|w| *w == 0.0) {
            return Err(PraError::InvalidConfig("need nonnegative weights, at least one > 0"));
        }
        if self.f_scale_hz <= 0.0 || self.w_scale_hz <= 0.0 || self.d_scale_db <= 0.0 {
            return Err(PraError::InvalidConfig("feature scales must be > 0"));
        }
        if self.miss_penalty < 0.0 {
            return Err(PraError::InvalidConfig("miss penalty must be >= 0"));
        }
        Ok(())
    }
}

/// A labeled reference pattern with its decision radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTemplate {
    pub label: String,
    #[serde(rename = "notches")]
    pub pattern: NotchPattern,
    #[serde(default)]
    pub weights: DistanceWeights,
    pub accept_radius: f64,
}

impl PatternTemplate {
    pub fn new(
        label: impl Into<String>,
        pattern: NotchPattern,
        weights: DistanceWeights,
        accept_radius: f64,
    ) -> Result<Self, PraError> {
        weights.validate()?;
        if !(accept_radius > 0.0) {
            return Err(PraError::InvalidConfig("accept radius must be > 0"));
        }
        Ok(Self { label: label.into(), pattern, weights, accept_radius })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PraError {
    InvalidConfig(&'static str),
    InvalidPattern(&'static str),
    /// The analysis band contains no spectrum bins.
    EmptyBand,
    /// `classify` needs at least one template.
    NoTemplates,
}

impl fmt::Display for PraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PraError::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
            PraError::InvalidPattern(m) => write!(f, "invalid pattern: {m}"),
            PraError::EmptyBand => write!(f, "analysis band contains no bins"),
            PraError::NoTemplates => write!(f, "template list is empty"),
        }
    }
}

impl core::error::Error for PraError {}

/// Floor for `log10` so zero bins map to a very deep but finite level.
const DB_FLOOR_MAG: f64 = 1e-300;

/// Extract the notch pattern of a magnitude spectrum.
///
/// Strict local extrema of the in-band dB magnitude are kept when their
/// prominence reaches the floor; each gets a parabola-interpolated
/// center frequency, a width measured `width_level_db` below the
/// (interpolated) crest with linear-interpolated crossings clamped at
/// the band edges, and its prominence as depth.
pub fn extract_pattern(sp: &Spectrum, cfg: &ExtractionConfig) -> Result<NotchPattern, PraError> {
    cfg.validate()?;
    let mut f = Vec::new();
    let mut y = Vec::new();
    for (&fq, v) in sp.freqs.iter().zip(&sp.values) {
        if fq >= cfg.band.0 && fq <= cfg.band.1 {
            f.push(fq);
            let db = 20.0 * v.norm().max(DB_FLOOR_MAG).log10();
            y.push(match cfg.polarity {
                Polarity::Peak => db,
                Polarity::Dip => -db,
            });
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(PraError::EmptyBand);
    }

    let mut notches = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] > y[i + 1]) {
            continue;
        }
        // prominence: walk outward until a higher sample appears, track
        // the deepest valley on each side, keep the higher of the two
        let mut left_base = y[i];
        let mut j = i;
        while j > 0 && y[j - 1] <= y[i] {
            j -= 1;
            left_base = left_base.min(y[j]);
        }
        let mut right_base = y[i];
        let mut j = i;
        while j + 1 < n && y[j + 1] <= y[i] {
            j += 1;
            right_base = right_base.min(y[j]);
        }
        let prominence = y[i] - left_base.max(right_base);
        if prominence < cfg.prominence_floor_db {
            continue;
        }

        let (f_notch, y_crest) =
            parabola_vertex(f[i - 1], y[i - 1], f[i], y[i], f[i + 1], y[i + 1]);
        let level = y_crest - cfg.width_level_db;

        // left crossing
        let mut j = i;
        while j > 0 && y[j] > level {
            j -= 1;
        }
        let f_left = if y[j] > level {
            f[0]
        } else {
            f[j] + (level - y[j]) / (y[j + 1] - y[j]) * (f[j + 1] - f[j])
        };
        // right crossing
        let mut j = i;
        while j + 1 < n && y[j] > level {
            j += 1;
        }
        let f_right = if y[j] > level {
            f[n - 1]
        } else {
            f[j - 1] + (y[j - 1] - level) / (y[j - 1] - y[j]) * (f[j] - f[j - 1])
        };

        let w = (f_right - f_left).max(f64::MIN_POSITIVE);
        notches.push(Notch { f_hz: f_notch, w_hz: w, d_db: prominence });
    }
    NotchPattern::new(notches)
}

/// Vertex of the parabola through three points; falls back to the
/// middle point when the triple is degenerate.
fn parabola_vertex(x0: f64, y0: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> (f64, f64) {
    let d0 = x1 - x0;
    let d2 = x1 - x2;
    let num = d0 * d0 * (y1 - y2) - d2 * d2 * (y1 - y0);
    let den = d0 * (y1 - y2) - d2 * (y1 - y0);
    if den == 0.0 {
        return (x1, y1);
    }
    let xv = x1 - 0.5 * num / den;
    // clamp to the bracketing interval
    let xv = xv.clamp(x1 - d0.abs().max(d2.abs()), x1 + d0.abs().max(d2.abs()));
    // evaluate the interpolating quadratic at xv (Newton form)
    let s01 = (y1 - y0) / (x1 - x0);
    let s12 = (y2 - y1) / (x2 - x1);
    let c2 = (s12 - s01) / (x2 - x0);
    let yv = y0 + s01 * (xv - x0) + c2 * (xv - x0) * (xv - x1);
    (xv, yv)
}

/// Weighted Euclidean dissimilarity between two notch patterns.
///
/// Notches pair greedily by nearest frequency; each matched pair adds
/// the weighted normalized feature distance, each unmatched notch adds
/// the miss penalty. Symmetric, nonnegative, zero only for identical
/// patterns.
pub fn pattern_distance(a: &NotchPattern, b: &NotchPattern, w: &DistanceWeights) -> f64 {
    // canonical argument order makes tie-breaking symmetric
    if pattern_cmp(a, b) == Ordering::Greater {
        return pattern_distance(b, a, w);
    }
    let na = a.notches.len();
    let nb = b.notches.len();
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(na * nb);
    for (i, x) in a.notches.iter().enumerate() {
        for (j, y) in b.notches.iter().enumerate() {
            cand.push(((x.f_hz - y.f_hz).abs(), i, j));
        }
    }
    cand.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = alloc::vec![false; na];
    let mut used_b = alloc::vec![false; nb];
    let mut total = 0.0;
    let mut pairs = 0;
    for (_, i, j) in cand {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        pairs += 1;
        let x = a.notches[i];
        let y = b.notches[j];
        let df = (x.f_hz - y.f_hz) / w.f_scale_hz;
        let dw = (x.w_hz - y.w_hz) / w.w_scale_hz;
        let dd = (x.d_db - y.d_db) / w.d_scale_db;
        total += (w.w_f * df * df + w.w_w * dw * dw + w.w_d * dd * dd).sqrt();
    }
    total + w.miss_penalty * ((na - pairs) + (nb - pairs)) as f64
}

fn pattern_cmp(a: &NotchPattern, b: &NotchPattern) -> Ordering {
    for (x, y) in a.notches.iter().zip(&b.notches) {
        let ord = x
            .f_hz
            .total_cmp(&y.f_hz)
            .then(x.w_hz.total_cmp(&y.w_hz))
            .then(x.d_db.total_cmp(&y.d_db));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.notches.len().cmp(&b.notches.len())
}

/// Nearest-template decision: the closest template's label when within
/// its accept radius, otherwise `None` ("unknown"). Ties keep the
/// earliest template.
pub fn classify<'t>(
    pattern: &NotchPattern,
    templates: &'t [PatternTemplate],
) -> Result<(Option<&'t str>, f64), PraError> {
    if templates.is_empty() {
        return Err(PraError::NoTemplates);
    }
    let mut best: Option<(&PatternTemplate, f64)> = None;
    for t in templates {
        let d = pattern_distance(pattern, &t.pattern, &t.weights);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((t, d)),
        }
    }
    let (t, d) = best.expect("templates non-empty");
    if d <= t.accept_radius {
        Ok((Some(t.label.as_str()), d))
    } else {
        Ok((None, d))
    }
}
