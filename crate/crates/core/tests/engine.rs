use std::time::Duration;

use proptest::prelude::*;

use sensim::medium::EventKind;
use sensim::metrics::{pawd, psm, pso, throughput};
use sensim::sensing::SensingDemand;
use sensim::trace::{find_overlap, frame_spans, parse_trace, TraceRecord};
use sensim::{simulate, simulate_traced, AccessMethod, Classification, RunResult, SimParams};

fn run(f: impl FnOnce(&mut SimParams)) -> (SimParams, RunResult) {
    let mut p = SimParams {
        sim_duration: Duration::from_secs(1),
        ..SimParams::default()
    };
    f(&mut p);
    let r = simulate(&p).unwrap();
    (p, r)
}

fn traced(p: &SimParams) -> (RunResult, Vec<TraceRecord>) {
    let mut buf = Vec::new();
    let r = simulate_traced(p, &mut buf).unwrap();
    (r, parse_trace(std::str::from_utf8(&buf).unwrap()).unwrap())
}

/// (open, close) of every window, from the trace.
fn windows(records: &[TraceRecord]) -> Vec<(Duration, Duration)> {
    let opens = records
        .iter()
        .filter(|r| r.kind == EventKind::WindowOpen)
        .map(|r| r.time);
    let closes = records
        .iter()
        .filter(|r| r.kind == EventKind::WindowClose)
        .map(|r| r.time);
    opens.zip(closes).collect()
}

#[test]
fn same_seed_same_run_other_seed_other_run() {
    let (_, a) = run(|p| p.access = AccessMethod::Edca);
    let (_, b) = run(|p| p.access = AccessMethod::Edca);
    let (_, c) = run(|p| {
        p.access = AccessMethod::Edca;
        p.rng_seed = 2;
    });
    assert_eq!(a, b);
    assert_ne!(a.metrics.data_bits, c.metrics.data_bits);
}

#[test]
fn sensing_frames_stay_inside_windows() {
    for access in [AccessMethod::Edca, AccessMethod::Pifs] {
        for code in [10, 50, 127] {
            let p = SimParams {
                access,
                n_sta: 10,
                saw_duration_code: code,
                sim_duration: Duration::from_millis(600),
                ..SimParams::default()
            };
            let (_, records) = traced(&p);
            let wins = windows(&records);
            assert_eq!(wins.len(), 5);
            for s in frame_spans(&records).iter().filter(|s| s.kind.is_sensing()) {
                assert_eq!(s.subject, 0);
                assert!(
                    wins.iter().any(|&(o, c)| s.start >= o && s.end <= c),
                    "{access} SAW {code}: {s:?} outside every window"
                );
            }
        }
    }
}

#[test]
fn pifs_grants_the_ap_at_window_open() {
    let p = SimParams {
        access: AccessMethod::Pifs,
        n_sta: 16,
        sim_duration: Duration::from_secs(1),
        ..SimParams::default()
    };
    let (_, records) = traced(&p);
    let spans = frame_spans(&records);
    for (open, _) in windows(&records) {
        let first = spans
            .iter()
            .find(|s| s.kind.is_sensing() && s.start >= open)
            .unwrap();
        assert_eq!(first.start, open + p.time_units.pifs());
        // no data exchange straddles the opening
        assert!(!spans
            .iter()
            .any(|s| !s.kind.is_sensing() && s.start < open && s.end > open));
    }
}

#[test]
fn pifs_outcome_does_not_depend_on_the_seed() {
    let classes = |seed| {
        let (_, r) = run(|p| {
            p.n_sta = 10;
            p.saw_duration_code = 50;
            p.rng_seed = seed;
        });
        (
            r.ledgers()
                .iter()
                .map(|l| (l.classification, l.sent_bytes))
                .collect::<Vec<_>>(),
            pso(&r.metrics).unwrap(),
        )
    };
    let first = classes(1);
    assert!(first
        .0
        .iter()
        .all(|&(c, _)| c == Classification::PartiallyMissed));
    for seed in 2..6 {
        assert_eq!(classes(seed), first);
    }
}

#[test]
fn complete_windows_carry_the_full_demand() {
    for access in [AccessMethod::Edca, AccessMethod::Pifs] {
        let (p, r) = run(|p| {
            p.access = access;
            p.n_sta = 8;
            p.saw_duration_code = 90;
        });
        let required = SensingDemand::from_params(&p).unwrap().required_bytes();
        for l in r.ledgers() {
            assert_eq!(l.required_bytes, required);
            assert!(l.sent_bytes <= required);
            assert_eq!(
                l.classification == Classification::Complete,
                l.sent_bytes == required
            );
        }
    }
}

#[test]
fn more_applications_never_help() {
    let mut prev = 0.0;
    for apps in [1, 2, 4, 6, 8] {
        let (_, r) = run(|p| {
            p.n_sta = 16;
            p.num_app = apps;
            p.saw_duration_code = 90;
        });
        let v = psm(&r.metrics).unwrap();
        assert!(v >= prev, "num_app {apps}: {v} < {prev}");
        prev = v;
    }
}

#[test]
fn baseline_ignores_window_settings() {
    let (_, a) = run(|p| {
        p.access = AccessMethod::NoSensing;
        p.saw_duration_code = 10;
    });
    let (_, b) = run(|p| {
        p.access = AccessMethod::NoSensing;
        p.saw_duration_code = 127;
        p.num_app = 8;
    });
    assert_eq!(a.window_count, 0);
    assert_eq!(a.partition().sensing, Duration::ZERO);
    assert_eq!(a.metrics.data_bits, b.metrics.data_bits);
    assert!(psm(&a.metrics).is_err());
    assert!(throughput(&a.metrics).unwrap() > 0.0);
}

#[test]
fn longer_windows_are_never_worse_under_pifs() {
    for n in [1, 6, 10, 16] {
        let at = |code| {
            let (_, r) = run(|p| {
                p.n_sta = n;
                p.saw_duration_code = code;
            });
            psm(&r.metrics).unwrap()
        };
        assert!(
            at(10) >= at(50) && at(50) >= at(90) && at(90) >= at(127),
            "n_sta {n}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_conservative_and_bounded(
        access in prop::sample::select(vec![AccessMethod::Edca, AccessMethod::Pifs, AccessMethod::NoSensing]),
        n_sta in 1u32..=16,
        num_app in 1u32..=8,
        code in 1u32..=127,
        period in 1u32..=3,
        cycles in 0u32..=3,
        seed in 0u64..1000,
        ms in 50u64..400,
    ) {
        let p = SimParams {
            access, n_sta, num_app,
            saw_duration_code: code,
            saw_period_code: period,
            ampdus_per_txop: cycles,
            rng_seed: seed,
            sim_duration: Duration::from_millis(ms),
            ..SimParams::default()
        };
        let (r, records) = traced(&p);
        prop_assert_eq!(r.partition().total(), p.sim_duration);
        prop_assert!(find_overlap(&frame_spans(&records)).is_none());
        prop_assert!(records.windows(2).all(|w| w[0].time <= w[1].time));
        let m = &r.metrics;
        let v = pso(m).unwrap();
        prop_assert!((0.0..=100.0).contains(&v));
        if !m.ledgers.is_empty() {
            prop_assert!((0.0..=100.0).contains(&psm(m).unwrap()));
            prop_assert!((0.0..=100.0).contains(&pawd(m).unwrap()));
        }
        // tracing adds frame-end events and nothing else
        let plain = simulate(&p).unwrap();
        prop_assert_eq!(RunResult { events: r.events, ..plain }, r);
    }
}
