//! Medication administration record and intervention rules.
//!
//! The record is an append-only log of drug events, raised alerts, and
//! acknowledgments. Two rules run against a prescription schedule on an
//! injected scenario clock (no wall-clock reads anywhere):
//!
//! * **double dose** — an opening that starts more administration cycles
//!   inside the trailing `cycle_window_s` than the schedule allows,
//! * **missed dose** — a dose window that closed without any opening,
//!   raised exactly once per dose no matter how often the check runs,
//!
//! plus **unscheduled administration** for openings outside every dose
//! window. Alerts go out through an [`AlertSink`] with bounded retries;
//! a failed delivery never removes the alert from the record.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::events::{DrugEvent, EventKind};

/// Dosing expectations for one tagged container and patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescriptionSchedule {
    pub tag_id: String,
    pub patient_id: String,
    /// Scheduled dose times on the scenario clock, strictly increasing.
    pub dose_times: Vec<f64>,
    pub window_before_s: f64,
    pub window_after_s: f64,
    pub max_cycles_per_window: u32,
    pub cycle_window_s: f64,
}

impl PrescriptionSchedule {
    pub fn validate(&self) -> Result<(), EmarError> {
        for pair in self.dose_times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(EmarError::InvalidSchedule("dose times must increase"));
            }
        }
        if self.window_before_s < 0.0 || self.window_after_s < 0.0 {
            return Err(EmarError::InvalidSchedule("windows must be >= 0"));
        }
        if self.max_cycles_per_window < 1 {
            return Err(EmarError::InvalidSchedule("max cycles must be >= 1"));
        }
        if !(self.cycle_window_s > 0.0) {
            return Err(EmarError::InvalidSchedule("cycle window must be > 0"));
        }
        Ok(())
    }

    fn window_contains(&self, dose_time: f64, t: f64) -> bool {
        t >= dose_time - self.window_before_s && t <= dose_time + self.window_after_s
    }

    fn in_any_window(&self, t: f64) -> bool {
        self.dose_times.iter().any(|&d| self.window_contains(d, t))
    }
}

/// Intervention categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlertKind {
    #[serde(rename = "MISSED_DOSE")]
    MissedDose,
    #[serde(rename = "DOUBLE_DOSE")]
    DoubleDose,
    #[serde(rename = "UNSCHEDULED_ADMIN")]
    UnscheduledAdmin,
}

/// Acknowledgment of an alert by a responder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub time: f64,
    pub responder: String,
}

/// One intervention message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: u64,
    pub kind: AlertKind,
    pub tag_id: String,
    pub patient_id: String,
    #[serde(rename = "ts")]
    pub timestamp: f64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acknowledged: Option<Acknowledgment>,
}

#[derive(Serialize)]
struct AlertWire<'a> {
    alert_id: u64,
    kind: AlertKind,
    tag_id: &'a str,
    patient_id: &'a str,
    ts: f64,
    message: &'a str,
}

impl Alert {
    /// The fixed wire form: `{alert_id, kind, tag_id, patient_id, ts,
    /// message}`.
    pub fn wire_json(&self) -> String {
        serde_json::to_string(&AlertWire {
            alert_id: self.alert_id,
            kind: self.kind,
            tag_id: &self.tag_id,
            patient_id: &self.patient_id,
            ts: self.timestamp,
            message: &self.message,
        })
        .expect("alert serialization cannot fail")
    }
}

/// One line of the append-only record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum RecordEntry {
    Event { event: DrugEvent },
    Alert {
        alert: Alert,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dose_time: Option<f64>,
    },
    Ack { alert_id: u64, time: f64, responder: String },
}

/// Append-only administration record with the rule-engine state.
///
/// Alert ids come from a deterministic counter, so replaying the same
/// event sequence against the same schedule reproduces the record
/// byte for byte.
#[derive(Debug, Clone, Default)]
pub struct AdministrationRecord {
    entries: Vec<RecordEntry>,
    alerts: BTreeMap<u64, Alert>,
    next_alert_id: u64,
    last_ts: Option<f64>,
    open_cycle_start: Option<f64>,
    completed_cycle_starts: Vec<f64>,
    opened_times: Vec<f64>,
    missed_alerted: BTreeSet<usize>,
}

impl AdministrationRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[RecordEntry] {
        &self.entries
    }

    /// Current view of an alert, acknowledgment included.
    pub fn alert(&self, alert_id: u64) -> Option<&Alert> {
        self.alerts.get(&alert_id)
    }

    /// All alerts raised so far, in id order.
    pub fn alerts(&self) -> impl Iterator<Item = &Alert> {
        self.alerts.values()
    }

    fn push_alert(
        &mut self,
        kind: AlertKind,
        sched: &PrescriptionSchedule,
        ts: f64,
        message: String,
        dose_time: Option<f64>,
    ) -> Alert {
        self.next_alert_id += 1;
        let alert = Alert {
            alert_id: self.next_alert_id,
            kind,
            tag_id: sched.tag_id.clone(),
            patient_id: sched.patient_id.clone(),
            timestamp: ts,
            message,
            acknowledged: None,
        };
        self.entries.push(RecordEntry::Alert { alert: alert.clone(), dose_time });
        self.alerts.insert(alert.alert_id, alert.clone());
        alert
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmarError {
    InvalidSchedule(&'static str),
    /// Event tag does not match the schedule's tag.
    TagMismatch,
    /// Event timestamp lies after `now`.
    EventInFuture,
    /// Record timestamps must be non-decreasing.
    TimeRegression,
    UnknownAlert(u64),
    AlreadyAcknowledged(u64),
}

impl fmt::Display for EmarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmarError::InvalidSchedule(m) => write!(f, "invalid schedule: {m}"),
            EmarError::TagMismatch => write!(f, "event tag does not match schedule tag"),
            EmarError::EventInFuture => write!(f, "event timestamp is after the clock"),
            EmarError::TimeRegression => write!(f, "record timestamps went backwards"),
            EmarError::UnknownAlert(id) => write!(f, "no alert with id {id}"),
            EmarError::AlreadyAcknowledged(id) => write!(f, "alert {id} already acknowledged"),
        }
    }
}

impl core::error::Error for EmarError {}

/// Record a drug event and run the opening rules.
///
/// An OPENED event starts an administration cycle; it raises
/// `DOUBLE_DOSE` when the cycles started within the trailing
/// `cycle_window_s` (this one included) exceed `max_cycles_per_window`,
/// and `UNSCHEDULED_ADMIN` when it falls outside every dose window. A
/// CLOSED event completes the running cycle.
pub fn evaluate_event(
    record: &mut AdministrationRecord,
    sched: &PrescriptionSchedule,
    ev: &DrugEvent,
    now: f64,
) -> Result<Vec<Alert>, EmarError> {
    sched.validate()?;
    if ev.tag_id != sched.tag_id {
        return Err(EmarError::TagMismatch);
    }
    if ev.timestamp > now {
        return Err(EmarError::EventInFuture);
    }
    if let Some(last) = record.last_ts {
        if ev.timestamp < last {
            return Err(EmarError::TimeRegression);
        }
    }
    record.last_ts = Some(ev.timestamp);
    record.entries.push(RecordEntry::Event { event: ev.clone() });

    let mut raised = Vec::new();
    match ev.kind {
        EventKind::Opened => {
            let ts = ev.timestamp;
            record.opened_times.push(ts);
            record.open_cycle_start = Some(ts);

            let window_lo = ts - sched.cycle_window_s;
            let recent = record
                .completed_cycle_starts
                .iter()
                .filter(|&&start| start > window_lo)
                .count() as u32;
            let cycles_in_window = recent + 1; // the cycle starting now
            if cycles_in_window > sched.max_cycles_per_window {
                let msg = format!(
                    "double dose risk: {cycles_in_window} administration cycles within {} s (max {})",
                    sched.cycle_window_s, sched.max_cycles_per_window
                );
                raised.push(record.push_alert(AlertKind::DoubleDose, sched, ts, msg, None));
            }
            if !sched.in_any_window(ts) {
                let msg = format!("container opened at t={ts} s outside every scheduled window");
                raised.push(record.push_alert(AlertKind::UnscheduledAdmin, sched, ts, msg, None));
            }
        }
        EventKind::Closed => {
            if let Some(start) = record.open_cycle_start.take() {
                record.completed_cycle_starts.push(start);
            }
        }
    }
    Ok(raised)
}

/// Raise `MISSED_DOSE` for every dose whose window has fully passed with
/// no opening inside it. Idempotent: each dose alerts at most once.
pub fn check_missed(
    record: &mut AdministrationRecord,
    sched: &PrescriptionSchedule,
    now: f64,
) -> Vec<Alert> {
    let mut raised = Vec::new();
    for (idx, &dose) in sched.dose_times.iter().enumerate() {
        if dose + sched.window_after_s >= now || record.missed_alerted.contains(&idx) {
            continue;
        }
        let taken = record.opened_times.iter().any(|&t| sched.window_contains(dose, t));
        if taken {
            continue;
        }
        record.missed_alerted.insert(idx);
        let msg = format!("missed dose: no opening within the window around t={dose} s");
        raised.push(record.push_alert(AlertKind::MissedDose, sched, now, msg, Some(dose)));
    }
    raised
}

/// Record a responder's acknowledgment as a new entry; the original
/// alert entry is never rewritten.
pub fn acknowledge(
    record: &mut AdministrationRecord,
    alert_id: u64,
    responder: impl Into<String>,
    time: f64,
) -> Result<(), EmarError> {
    let responder = responder.into();
    let alert = record
        .alerts
        .get_mut(&alert_id)
        .ok_or(EmarError::UnknownAlert(alert_id))?;
    if alert.acknowledged.is_some() {
        return Err(EmarError::AlreadyAcknowledged(alert_id));
    }
    alert.acknowledged = Some(Acknowledgment { time, responder: responder.clone() });
    record.entries.push(RecordEntry::Ack { alert_id, time, responder });
    Ok(())
}

/// Where alerts are delivered. Implementations perform one delivery
/// attempt per call.
pub trait AlertSink {
    fn send(&mut self, payload: &str) -> Result<(), SinkError>;
}

/// A failed delivery attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkError(pub String);

impl fmt::Display for SinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sink delivery failed: {}", self.0)
    }
}

impl core::error::Error for SinkError {}

/// Outcome of publishing one alert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryReceipt {
    pub alert_id: u64,
    pub delivered: bool,
    pub attempt_count: u32,
}

/// Serialize `alert` to its wire form and deliver it, retrying up to
/// `max_attempts` times. A false `delivered` flag is a receipt, not an
/// error: the alert stays in the record regardless.
pub fn publish(alert: &Alert, sink: &mut dyn AlertSink, max_attempts: u32) -> DeliveryReceipt {
    let payload = alert.wire_json();
    let max_attempts = max_attempts.max(1);
    let mut attempt_count = 0;
    let mut delivered = false;
    while attempt_count < max_attempts {
        attempt_count += 1;
        if sink.send(&payload).is_ok() {
            delivered = true;
            break;
        }
    }
    DeliveryReceipt { alert_id: alert.alert_id, delivered, attempt_count }
}
