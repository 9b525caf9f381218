//! From spectra to discrete drug events: open/closed state
//! classification, a per-tag debouncer that turns state flicker into a
//! clean event stream, and multi-bit code readout from notch positions.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::pra::{
    classify, extract_pattern, pattern_distance, ExtractionConfig, NotchPattern, PatternTemplate,
    PraError,
};
use crate::sem::{dft_spectrum, synthesize_time, Pole, SamplingGrid, SemError, Spectrum,
    TagSignature};

/// Physical configuration of the tagged container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagState {
    Open,
    Closed,
    Unknown,
}

/// Direction of a debounced state transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "OPENED")]
    Opened,
    #[serde(rename = "CLOSED")]
    Closed,
}

/// One discrete container event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugEvent {
    /// Scenario-clock timestamp in seconds.
    #[serde(rename = "ts")]
    pub timestamp: f64,
    pub tag_id: String,
    pub kind: EventKind,
    /// Matched-template distance of the confirming observation.
    pub confidence: f64,
}

/// Reference templates for one tag's two states, plus an optional
/// codebook mapping bit strings to code words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTemplateSet {
    pub tag_id: String,
    pub open_template: PatternTemplate,
    pub closed_template: PatternTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook: Option<BTreeMap<String, String>>,
}

impl TagTemplateSet {
    /// Build a template set, rejecting open/closed templates that sit
    /// within each other's accept radius.
    pub fn new(
        tag_id: impl Into<String>,
        open_template: PatternTemplate,
        closed_template: PatternTemplate,
        codebook: Option<BTreeMap<String, String>>,
    ) -> Result<Self, EventError> {
        let d_open = pattern_distance(
            &open_template.pattern,
            &closed_template.pattern,
            &open_template.weights,
        );
        let d_closed = pattern_distance(
            &open_template.pattern,
            &closed_template.pattern,
            &closed_template.weights,
        );
        if d_open <= open_template.accept_radius || d_closed <= closed_template.accept_radius {
            return Err(EventError::TemplatesTooClose);
        }
        Ok(Self { tag_id: tag_id.into(), open_template, closed_template, codebook })
    }
}

/// Debounce settings: how long a new state must persist before an event
/// fires, and how much UNKNOWN flicker is tolerated without touching the
/// confirmed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebounceConfig {
    pub hold_time_s: f64,
    pub unknown_grace_s: f64,
}

impl Default for DebounceConfig {
    /// Tuned for a 10 Hz observation rate.
    fn default() -> Self {
        Self { hold_time_s: 0.5, unknown_grace_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventError {
    /// Observation timestamps must be non-decreasing.
    TimeRegression,
    /// Open and closed templates must be distinguishable.
    TemplatesTooClose,
    /// Two notches landed in one code slot.
    AmbiguousRead,
    InvalidSlots(&'static str),
    Pra(PraError),
    Sem(SemError),
}

impl fmt::Display for EventError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventError::TimeRegression => write!(f, "observation timestamps went backwards"),
            EventError::TemplatesTooClose => {
                write!(f, "open/closed templates lie within each other's accept radius")
            }
            EventError::AmbiguousRead => write!(f, "two notches claim the same code slot"),
            EventError::InvalidSlots(m) => write!(f, "invalid slots: {m}"),
            EventError::Pra(e) => write!(f, "{e}"),
            EventError::Sem(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EventError {}

impl From<PraError> for EventError {
    fn from(e: PraError) -> Self {
        EventError::Pra(e)
    }
}

impl From<SemError> for EventError {
    fn from(e: SemError) -> Self {
        EventError::Sem(e)
    }
}

/// Classify one observed spectrum against a tag's open/closed templates.
///
/// Returns the nearest state when it falls within that template's accept
/// radius, otherwise [`TagState::Unknown`]; the second element is the
/// winning distance either way.
pub fn classify_state(
    sp: &Spectrum,
    templates: &TagTemplateSet,
    cfg: &ExtractionConfig,
) -> Result<(TagState, f64), EventError> {
    let pattern = extract_pattern(sp, cfg)?;
    let pair =
        [templates.open_template.clone(), templates.closed_template.clone()];
    let (label, distance) = classify(&pattern, &pair)?;
    let state = match label {
        Some(l) if l == templates.open_template.label => TagState::Open,
        Some(_) => TagState::Closed,
        None => TagState::Unknown,
    };
    Ok((state, distance))
}

/// Per-tag debounce state machine.
///
/// Observations stream in as `(state, confidence, timestamp)`; a new
/// known state must persist `hold_time_s` before the transition event is
/// emitted, UNKNOWN runs shorter than `unknown_grace_s` are ignored, and
/// the first confirmed state becomes the baseline without an event.
#[derive(Debug, Clone)]
pub struct Debouncer {
    tag_id: String,
    cfg: DebounceConfig,
    last_ts: Option<f64>,
    confirmed: TagState,
    last_known: Option<TagState>,
    candidate: Option<(TagState, f64)>,
    unknown_since: Option<f64>,
}

impl Debouncer {
    pub fn new(tag_id: impl Into<String>, cfg: DebounceConfig) -> Self {
        Self {
            tag_id: tag_id.into(),
            cfg,
            last_ts: None,
            confirmed: TagState::Unknown,
            last_known: None,
            candidate: None,
            unknown_since: None,
        }
    }

    /// The current debounced state.
    pub fn state(&self) -> TagState {
        self.confirmed
    }

    /// Feed one observation; may emit a debounced transition event.
    pub fn advance(
        &mut self,
        state: TagState,
        confidence: f64,
        ts: f64,
    ) -> Result<Option<DrugEvent>, EventError> {
        if let Some(last) = self.last_ts {
            if ts < last {
                return Err(EventError::TimeRegression);
            }
        }
        self.last_ts = Some(ts);

        if state == TagState::Unknown {
            let since = *self.unknown_since.get_or_insert(ts);
            if ts - since >= self.cfg.unknown_grace_s {
                self.confirmed = TagState::Unknown;
                self.candidate = None;
            }
            return Ok(None);
        }
        self.unknown_since = None;

        if state == self.confirmed {
            self.candidate = None;
            return Ok(None);
        }

        let onset = match self.candidate {
            Some((cand, t0)) if cand == state => t0,
            _ => {
                self.candidate = Some((state, ts));
                ts
            }
        };
        if ts - onset < self.cfg.hold_time_s {
            return Ok(None);
        }

        self.confirmed = state;
        self.candidate = None;
        if self.last_known == Some(state) {
            return Ok(None);
        }
        let emit = self.last_known.is_some();
        self.last_known = Some(state);
        if !emit {
            return Ok(None);
        }
        let kind = match state {
            TagState::Open => EventKind::Opened,
            TagState::Closed => EventKind::Closed,
            TagState::Unknown => unreachable!("unknown handled above"),
        };
        Ok(Some(DrugEvent { timestamp: ts, tag_id: self.tag_id.clone(), kind, confidence }))
    }
}

/// Decoded bit vector plus its codebook word, when one is mapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitCode {
    pub bits: Vec<bool>,
    pub codeword: Option<String>,
}

impl BitCode {
    /// Slot-order bit string, e.g. `101`.
    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for BitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit_string())
    }
}

/// Read the presence code of a notch pattern: bit `k` is set when some
/// notch lies within `slot_tolerance` of `slot_freqs[k]`. Two notches
/// claiming one slot make the read ambiguous.
pub fn decode_bits(
    pattern: &NotchPattern,
    codebook: Option<&BTreeMap<String, String>>,
    slot_freqs: &[f64],
    slot_tolerance: f64,
) -> Result<BitCode, EventError> {
    if slot_freqs.is_empty() {
        return Err(EventError::InvalidSlots("need at least one slot"));
    }
    if !(slot_tolerance > 0.0) {
        return Err(EventError::InvalidSlots("slot tolerance must be > 0"));
    }
    for pair in slot_freqs.windows(2) {
        if pair[1] <= pair[0] {
            return Err(EventError::InvalidSlots("slot frequencies must increase"));
        }
    }
    let mut bits = alloc::vec![false; slot_freqs.len()];
    for notch in pattern.notches() {
        let (k, slot) = slot_freqs
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (notch.f_hz - a.1).abs().total_cmp(&(notch.f_hz - b.1).abs())
            })
            .expect("slots non-empty");
        if (notch.f_hz - slot).abs() > slot_tolerance {
            continue;
        }
        if bits[k] {
            return Err(EventError::AmbiguousRead);
        }
        bits[k] = true;
    }
    let code = BitCode { bits, codeword: None };
    let codeword = codebook.and_then(|cb| cb.get(&code.bit_string()).cloned());
    Ok(BitCode { codeword, ..code })
}

/// The open/closed signature pair of one container tag.
///
/// Standard profile: a single resonance that sits at 1.2 GHz while the
/// container is open and shifts to 1.6 GHz with a narrower notch
/// (`α_closed = 0.6·α_open`) when the lid loads the tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TagProfile {
    pub open: TagSignature,
    pub closed: TagSignature,
}

impl TagProfile {
    pub fn standard() -> Self {
        let alpha_open = 2.0 * PI * 1e8;
        let one = Complex64::new(1.0, 0.0);
        let open = TagSignature::new(
            "open",
            alloc::vec![Pole::new(alpha_open, 2.0 * PI * 1.2e9, one).expect("valid pole")],
        )
        .expect("valid signature");
        let closed = TagSignature::new(
            "closed",
            alloc::vec![Pole::new(0.6 * alpha_open, 2.0 * PI * 1.6e9, one).expect("valid pole")],
        )
        .expect("valid signature");
        Self { open, closed }
    }
}

/// Extraction settings for the standard tag band (0.8–2.0 GHz).
pub fn tag_extraction_config() -> ExtractionConfig {
    ExtractionConfig { band: (0.8e9, 2.0e9), ..ExtractionConfig::default() }
}

/// Default accept radius for tag-state templates; noisy self-distances
/// at usable SNRs stay well under it while the open/closed cross
/// distance (~0.98) stays well above.
pub const TAG_ACCEPT_RADIUS: f64 = 0.5;

/// Build a tag's template set by running both profile signatures through
/// the same synthesis + extraction pipeline used on observations.
pub fn build_template_set(
    tag_id: impl Into<String>,
    profile: &TagProfile,
    grid: &SamplingGrid,
    cfg: &ExtractionConfig,
    accept_radius: f64,
) -> Result<TagTemplateSet, EventError> {
    let make = |sig: &TagSignature| -> Result<PatternTemplate, EventError> {
        let ts = synthesize_time(sig, grid);
        let sp = dft_spectrum(&ts, &grid.bin_freqs())?;
        let pattern = extract_pattern(&sp, cfg)?;
        Ok(PatternTemplate::new(sig.label(), pattern, Default::default(), accept_radius)?)
    };
    let open_template = make(&profile.open)?;
    let closed_template = make(&profile.closed)?;
    TagTemplateSet::new(tag_id, open_template, closed_template, None)
}
