//! Randomized property suites for the core invariants.

use chipless_core::channel::{apply_phase_noise, ChannelConfig};
use chipless_core::emar::{
    acknowledge, check_missed, evaluate_event, AdministrationRecord, PrescriptionSchedule,
    RecordEntry,
};
use chipless_core::events::{
    build_template_set, classify_state, decode_bits, tag_extraction_config, DebounceConfig,
    Debouncer, DrugEvent, EventKind, TagProfile, TagState, TAG_ACCEPT_RADIUS,
};
use chipless_core::mpm::{mpm_error, EstimatedPole, PoleEstimate};
use chipless_core::pra::{
    classify, extract_pattern, pattern_distance, DistanceWeights, ExtractionConfig, Notch,
    NotchPattern, PatternTemplate,
};
use chipless_core::sem::{
    analytic_spectrum, dft_spectrum, synthesize_time, Pole, SamplingGrid, TagSignature,
};
use chipless_core::Complex64;
use proptest::prelude::*;

fn pole_params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (
        5e7..1.5e9f64,                  // alpha
        0.3e9..4.5e9f64,                // omega / 2pi
        -2.0..2.0f64,                   // residue re
        -2.0..2.0f64,                   // residue im
    )
}

fn signature_strategy() -> impl Strategy<Value = TagSignature> {
    proptest::collection::vec(pole_params(), 1..4).prop_filter_map(
        "pole frequencies must be separated",
        |params| {
            let mut params = params;
            params.sort_by(|a, b| a.1.total_cmp(&b.1));
            for pair in params.windows(2) {
                if pair[1].1 - pair[0].1 < 5e7 {
                    return None;
                }
            }
            let poles: Vec<Pole> = params
                .iter()
                .map(|&(a, f, re, im)| {
                    let residue = Complex64::new(re, im);
                    let residue = if residue.norm() < 1e-3 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        residue
                    };
                    Pole::new(a, 2.0 * core::f64::consts::PI * f, residue).unwrap()
                })
                .collect();
            TagSignature::new("sig", poles).ok()
        },
    )
}

fn pattern_strategy() -> impl Strategy<Value = NotchPattern> {
    proptest::collection::vec(
        (1e7..9e8f64, 1e6..5e8f64, 0.5..40.0f64),
        0..5,
    )
    .prop_map(|triples| {
        let mut f = 1e8;
        let notches: Vec<Notch> = triples
            .into_iter()
            .map(|(gap, w, d)| {
                f += gap;
                Notch { f_hz: f, w_hz: w, d_db: d }
            })
            .collect();
        NotchPattern::new(notches).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // synthesizing the union of two pole sets equals the sample-wise sum
    #[test]
    fn synthesis_is_linear(a in signature_strategy(), b in signature_strategy()) {
        let grid = SamplingGrid::new(0.05e-9, 64, 0.1e9, 5.0e9).unwrap();
        let mut all: Vec<Pole> = a.poles().iter().chain(b.poles()).copied().collect();
        all.sort_by(|p, q| p.omega().total_cmp(&q.omega()));
        prop_assume!(all.windows(2).all(|w| w[1].omega() - w[0].omega() > 1.0));
        let union = TagSignature::new("u", all).unwrap();
        let ta = synthesize_time(&a, &grid);
        let tb = synthesize_time(&b, &grid);
        let tu = synthesize_time(&union, &grid);
        for k in 0..grid.n_samples() {
            let want = ta.samples[k] + tb.samples[k];
            let got = tu.samples[k];
            prop_assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    // scaling every residue by c scales time samples and spectra by c
    #[test]
    fn residue_scaling_scales_outputs(
        sig in signature_strategy(),
        cre in -3.0..3.0f64,
        cim in -3.0..3.0f64,
    ) {
        let c = Complex64::new(cre, cim);
        prop_assume!(c.norm() > 1e-3);
        let grid = SamplingGrid::new(0.05e-9, 64, 0.1e9, 5.0e9).unwrap();
        let scaled_poles: Vec<Pole> = sig
            .poles()
            .iter()
            .map(|p| Pole::new(p.alpha(), p.omega(), p.residue() * c).unwrap())
            .collect();
        let scaled = TagSignature::new("c", scaled_poles).unwrap();
        let t1 = synthesize_time(&sig, &grid);
        let t2 = synthesize_time(&scaled, &grid);
        for k in 0..grid.n_samples() {
            let want = t1.samples[k] * c;
            prop_assert!((t2.samples[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
        let freqs = [0.5e9, 1.1e9, 2.3e9, 4.4e9];
        let s1 = analytic_spectrum(&sig, &freqs).unwrap();
        let s2 = analytic_spectrum(&scaled, &freqs).unwrap();
        for k in 0..freqs.len() {
            let want = s1.values[k] * c;
            prop_assert!((s2.values[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    // every single-pole envelope decays strictly
    #[test]
    fn single_pole_envelope_decays((alpha, f, re, im) in pole_params()) {
        let residue = Complex64::new(re, im);
        prop_assume!(residue.norm() > 1e-6);
        let sig = TagSignature::new(
            "p",
            vec![Pole::new(alpha, 2.0 * core::f64::consts::PI * f, residue).unwrap()],
        )
        .unwrap();
        let grid = SamplingGrid::new(0.05e-9, 128, 0.1e9, 5.0e9).unwrap();
        let ts = synthesize_time(&sig, &grid);
        for pair in ts.samples.windows(2) {
            prop_assert!(pair[1].norm() < pair[0].norm());
        }
    }

    // phase noise never touches per-bin magnitudes (beyond rounding)
    #[test]
    fn phase_noise_preserves_magnitude_spectrum(
        sig in signature_strategy(),
        deg in 0.0..45.0f64,
        seed in any::<u64>(),
    ) {
        let grid = SamplingGrid::new(0.05e-9, 128, 0.1e9, 5.0e9).unwrap();
        let sp = dft_spectrum(&synthesize_time(&sig, &grid), &grid.bin_freqs()).unwrap();
        let cfg = ChannelConfig { snr_db: None, phase_noise_deg: deg, seed };
        let out = apply_phase_noise(&sp, &cfg);
        for (a, b) in out.values.iter().zip(&sp.values) {
            prop_assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * (1.0 + b.norm()));
        }
    }

    // classification of synthetic observations is phase-noise invariant
    #[test]
    fn classification_is_phase_invariant(deg in 0.0..30.0f64, seed in any::<u64>(), open in any::<bool>()) {
        let grid = SamplingGrid::default();
        let profile = TagProfile::standard();
        let templates = build_template_set(
            "tag",
            &profile,
            &grid,
            &tag_extraction_config(),
            TAG_ACCEPT_RADIUS,
        )
        .unwrap();
        let sig = if open { &profile.open } else { &profile.closed };
        let sp = dft_spectrum(&synthesize_time(sig, &grid), &grid.bin_freqs()).unwrap();
        let cfg = ChannelConfig { snr_db: None, phase_noise_deg: deg, seed };
        let rotated = apply_phase_noise(&sp, &cfg);
        let ex = tag_extraction_config();
        let before = classify_state(&sp, &templates, &ex).unwrap();
        let after = classify_state(&rotated, &templates, &ex).unwrap();
        prop_assert_eq!(before.0, after.0);
        prop_assert!((before.1 - after.1).abs() <= 1e-9 * (1.0 + before.1));
    }

    // premetric: nonnegative, zero on self, symmetric
    #[test]
    fn pattern_distance_is_a_symmetric_premetric(
        a in pattern_strategy(),
        b in pattern_strategy(),
    ) {
        let w = DistanceWeights::default();
        let dab = pattern_distance(&a, &b, &w);
        let dba = pattern_distance(&b, &a, &w);
        prop_assert!(dab >= 0.0);
        prop_assert_eq!(dab, dba);
        prop_assert_eq!(pattern_distance(&a, &a, &w), 0.0);
        prop_assert_eq!(pattern_distance(&b, &b, &w), 0.0);
    }

    // mpm_error: permutation invariant, zero iff matched poles coincide
    #[test]
    fn mpm_error_permutation_and_zero(
        sig in signature_strategy(),
        shuffle_seed in any::<u64>(),
        eps_scale in 0.0..0.2f64,
    ) {
        let truth = sig.poles();
        let mut est_poles: Vec<EstimatedPole> = truth
            .iter()
            .map(|p| EstimatedPole { alpha: p.alpha(), omega: p.omega(), residue: p.residue() })
            .collect();
        // deterministic shuffle
        let mut state = shuffle_seed;
        for i in (1..est_poles.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            est_poles.swap(i, j);
        }
        let est = PoleEstimate {
            poles: est_poles.clone(),
            order_used: est_poles.len(),
            singular_values: vec![1.0],
            ill_conditioned: false,
        };
        prop_assert_eq!(mpm_error(truth, &est).unwrap(), 0.0);

        // perturbing one pole makes the error strictly positive
        if eps_scale > 1e-6 {
            let mut perturbed = est_poles;
            perturbed[0].alpha *= 1.0 + eps_scale;
            let est2 = PoleEstimate {
                poles: perturbed,
                order_used: truth.len(),
                singular_values: vec![1.0],
                ill_conditioned: false,
            };
            prop_assert!(mpm_error(truth, &est2).unwrap() > 0.0);
        }
    }

    // decode_bits is monotone: filling an empty slot never clears bits
    #[test]
    fn decode_bits_is_monotone(pattern in pattern_strategy()) {
        let slots = [1.0e9, 1.75e9, 2.5e9];
        let tol = 1.0e8;
        let base = match decode_bits(&pattern, None, &slots, tol) {
            Ok(code) => code,
            Err(_) => return Ok(()), // ambiguous read: nothing to compare
        };
        // add a notch dead-center in the first empty slot
        let empty = match base.bits.iter().position(|b| !b) {
            Some(k) => k,
            None => return Ok(()),
        };
        let mut notches = pattern.notches().to_vec();
        notches.push(Notch { f_hz: slots[empty], w_hz: 1e8, d_db: 10.0 });
        notches.sort_by(|a, b| a.f_hz.total_cmp(&b.f_hz));
        prop_assume!(notches.windows(2).all(|p| p[1].f_hz > p[0].f_hz));
        let bigger = NotchPattern::new(notches).unwrap();
        if let Ok(code) = decode_bits(&bigger, None, &slots, tol) {
            for (was, now) in base.bits.iter().zip(&code.bits) {
                prop_assert!(!was || *now, "an existing bit was cleared");
            }
            prop_assert!(code.bits[empty]);
        }
    }
}

/// Random state scripts for the debouncer, always starting and ending
/// with a long CLOSED stretch.
fn observation_script() -> impl Strategy<Value = Vec<(TagState, u32)>> {
    proptest::collection::vec(
        (
            prop_oneof![
                Just(TagState::Open),
                Just(TagState::Closed),
                Just(TagState::Unknown)
            ],
            1..25u32, // segment length in 0.1 s ticks
        ),
        0..12,
    )
    .prop_map(|mut segs| {
        segs.insert(0, (TagState::Closed, 30));
        segs.push((TagState::Closed, 30));
        segs
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // parity: a stream that starts and ends settled-CLOSED emits equal
    // numbers of OPENED and CLOSED events, strictly alternating
    #[test]
    fn debounce_event_parity_and_alternation(script in observation_script()) {
        let mut deb = Debouncer::new("tag", DebounceConfig::default());
        let mut t = 0.0;
        let mut events = Vec::new();
        for (state, ticks) in script {
            for _ in 0..ticks {
                if let Some(ev) = deb.advance(state, 0.0, t).unwrap() {
                    events.push(ev);
                }
                t += 0.1;
            }
        }
        let opened = events.iter().filter(|e| e.kind == EventKind::Opened).count();
        let closed = events.iter().filter(|e| e.kind == EventKind::Closed).count();
        prop_assert_eq!(opened, closed, "parity violated: {:?}", events);
        for pair in events.windows(2) {
            prop_assert!(pair[0].kind != pair[1].kind, "same kind twice in a row");
        }
        for pair in events.windows(2) {
            prop_assert!(pair[1].timestamp >= pair[0].timestamp);
        }
    }

    // eMAR: alerts never get lost, missed checks are idempotent, and the
    // serialized record only ever grows by appending
    #[test]
    fn emar_record_invariants(
        gaps in proptest::collection::vec(1.0..120.0f64, 1..8),
        dose in 50.0..400.0f64,
        check_times in proptest::collection::vec(0.0..900.0f64, 0..6),
    ) {
        let sched = PrescriptionSchedule {
            tag_id: "tag".into(),
            patient_id: "p".into(),
            dose_times: vec![dose],
            window_before_s: 15.0,
            window_after_s: 25.0,
            max_cycles_per_window: 1,
            cycle_window_s: 120.0,
        };
        let mut rec = AdministrationRecord::new();
        let mut raised = Vec::new();
        let mut t = 0.0;
        let mut snapshots: Vec<String> = Vec::new();
        let mut kind = EventKind::Opened;
        for gap in gaps {
            t += gap;
            let ev = DrugEvent {
                timestamp: t,
                tag_id: "tag".into(),
                kind,
                confidence: 0.0,
            };
            kind = match kind {
                EventKind::Opened => EventKind::Closed,
                EventKind::Closed => EventKind::Opened,
            };
            raised.extend(evaluate_event(&mut rec, &sched, &ev, t).unwrap());
            snapshots.push(serde_json::to_string(&rec.entries().to_vec()).unwrap());
        }
        let mut checks = check_times;
        checks.sort_by(f64::total_cmp);
        for now in checks {
            if now < t { continue; }
            let first = check_missed(&mut rec, &sched, now);
            raised.extend(first);
            let again = check_missed(&mut rec, &sched, now);
            prop_assert!(again.is_empty(), "missed-dose check must be idempotent");
            snapshots.push(serde_json::to_string(&rec.entries().to_vec()).unwrap());
        }
        // no alert loss: everything raised is queryable in the record
        for alert in &raised {
            prop_assert!(rec.alert(alert.alert_id).is_some());
        }
        let in_record = rec.alerts().count();
        prop_assert_eq!(in_record, raised.len());
        // append-only serialization: each snapshot is a prefix of the next
        for pair in snapshots.windows(2) {
            let head = pair[0].trim_end_matches(']');
            prop_assert!(pair[1].starts_with(head));
        }
        // acknowledgment flow stays append-only
        if let Some(alert) = raised.first() {
            let before = rec.entries().len();
            acknowledge(&mut rec, alert.alert_id, "resp", t + 1000.0).unwrap();
            prop_assert_eq!(rec.entries().len(), before + 1);
            let last_is_ack = matches!(rec.entries().last(), Some(RecordEntry::Ack { .. }));
            prop_assert!(last_is_ack);
        }
    }
}

/// Classify-extract pipeline behaves identically on an analytic
/// spectrum rotated by any phase profile: the whole-pattern check used
/// by the classifier suites above, pinned here once with templates from
/// arbitrary sweeps.
#[test]
fn classify_matches_across_rotation_for_code_templates() {
    let grid = SamplingGrid::default();
    let one = Complex64::new(1.0, 0.0);
    let sig = TagSignature::new(
        "code",
        vec![
            Pole::new(2.0 * core::f64::consts::PI * 1e8, 2.0 * core::f64::consts::PI * 1e9, one)
                .unwrap(),
            Pole::new(
                3.5 * core::f64::consts::PI * 1e8,
                3.5 * core::f64::consts::PI * 1e9,
                one,
            )
            .unwrap(),
        ],
    )
    .unwrap();
    let sp = dft_spectrum(&synthesize_time(&sig, &grid), &grid.bin_freqs()).unwrap();
    let cfg = ExtractionConfig::default();
    let pattern = extract_pattern(&sp, &cfg).unwrap();
    let template =
        PatternTemplate::new("code", pattern, DistanceWeights::default(), 5.0).unwrap();
    let templates = vec![template];

    for seed in [1u64, 22, 333] {
        let ch = ChannelConfig { snr_db: None, phase_noise_deg: 20.0, seed };
        let rotated = apply_phase_noise(&sp, &ch);
        let p0 = extract_pattern(&sp, &cfg).unwrap();
        let p1 = extract_pattern(&rotated, &cfg).unwrap();
        let (l0, d0) = classify(&p0, &templates).unwrap();
        let (l1, d1) = classify(&p1, &templates).unwrap();
        assert_eq!(l0, l1);
        assert!((d0 - d1).abs() <= 1e-9);
    }
}
