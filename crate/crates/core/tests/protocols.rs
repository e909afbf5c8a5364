use std::collections::BTreeMap;

use proptest::prelude::*;
use wishsync_core::config::{Behavior, ClientOp, FaultDirective, Protocol};
use wishsync_core::msg::Value;
use wishsync_core::sim::run_with_sink;
use wishsync_core::{run_scenario, EventKind, Pid, Pos, ScenarioConfig, Trace, View};

const SMR: [Protocol; 3] = [Protocol::PbftLight, Protocol::PbftRotation, Protocol::HotstuffLight];
const ALL: [Protocol; 5] = [
    Protocol::PbftLight,
    Protocol::PbftRotation,
    Protocol::HotstuffLight,
    Protocol::ToyClient,
    Protocol::ConsensusSync,
];

fn scenario(protocol: Protocol, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::baseline(protocol, 1, seed);
    c.gst = 100;
    c.horizon = 1500;
    c.faulty_set = vec![1];
    for i in 0..6 {
        c.broadcasts.push(ClientOp { pid: [0, 2, 3][i as usize % 3], t: 20 * i + 5, id: i + 1, payload: None });
    }
    c
}

/// Delivered `(position, value)` sequence of each process.
fn logs(t: &Trace) -> BTreeMap<Pid, Vec<(Pos, Value)>> {
    let mut out: BTreeMap<Pid, Vec<(Pos, Value)>> = BTreeMap::new();
    for e in &t.events {
        if let EventKind::Deliver { position, value } = &e.kind {
            out.entry(e.pid).or_default().push((*position, value.clone()));
        }
    }
    out
}

fn views(t: &Trace, p: Pid) -> Vec<View> {
    t.events
        .iter()
        .filter(|e| e.pid == p)
        .filter_map(|e| match e.kind {
            EventKind::EnterView { v } => Some(v),
            _ => None,
        })
        .collect()
}

#[test]
fn every_value_is_delivered_once_everywhere_with_a_crashed_process() {
    for protocol in SMR {
        for latency_mode in [false, true] {
            let mut c = scenario(protocol, 7);
            c.latency_mode = latency_mode;
            let t = run_scenario(&c).unwrap();
            let logs = logs(&t);
            for p in c.correct() {
                let ids: Vec<u64> = logs[&p].iter().filter_map(|(_, x)| x.id()).collect();
                let mut sorted = ids.clone();
                sorted.sort();
                assert_eq!(sorted, (1..=6).collect::<Vec<_>>(), "{protocol:?} p{p}");
            }
            assert!(!logs.contains_key(&1), "crashed process delivered");
        }
    }
}

#[test]
fn correct_logs_agree_position_by_position() {
    for protocol in SMR {
        for seed in 0..5 {
            let mut c = scenario(protocol, seed);
            c.fault_plan.push(FaultDirective::Drop { permille: 300, from: None, to: None });
            c.fault_plan.push(FaultDirective::Delay { max: 60 });
            let t = run_scenario(&c).unwrap();
            let mut at: BTreeMap<Pos, Value> = BTreeMap::new();
            for (p, log) in logs(&t) {
                assert!(log.windows(2).all(|w| w[0].0 < w[1].0), "{protocol:?} p{p} positions not increasing");
                for (k, x) in log {
                    let prev = at.entry(k).or_insert_with(|| x.clone());
                    assert_eq!(*prev, x, "{protocol:?} seed {seed} position {k}");
                }
            }
        }
    }
}

#[test]
fn views_increase_by_one_after_start() {
    for protocol in ALL {
        let t = run_scenario(&scenario(protocol, 3)).unwrap();
        for p in [0, 2, 3] {
            let vs = views(&t, p);
            assert!(!vs.is_empty(), "{protocol:?} p{p} never entered a view");
            assert!(vs.windows(2).all(|w| w[0] < w[1]), "{protocol:?} p{p}: {vs:?}");
        }
    }
}

#[test]
fn toy_client_keeps_advancing() {
    let mut c = scenario(Protocol::ToyClient, 1);
    c.broadcasts.clear();
    let t = run_scenario(&c).unwrap();
    let top = views(&t, 0).last().copied().unwrap_or(0);
    assert!(top > 20, "only reached view {top}");
}

#[test]
fn crashed_process_is_silent_after_crash() {
    let mut c = scenario(Protocol::PbftRotation, 2);
    c.faulty_set = vec![3];
    c.fault_plan.push(FaultDirective::Byzantine { pid: 3, behavior: Behavior::Crash { at: 400 } });
    let t = run_scenario(&c).unwrap();
    let sends_after = t
        .events
        .iter()
        .filter(|e| e.pid == 3 && e.t > 400 && matches!(e.kind, EventKind::Send { .. }))
        .count();
    assert_eq!(sends_after, 0);
    assert!(t.events.iter().any(|e| e.pid == 3 && e.t <= 400 && matches!(e.kind, EventKind::Send { .. })));
}

#[test]
fn sink_sees_the_same_events_as_the_trace() {
    for protocol in ALL {
        let c = scenario(protocol, 4);
        let t = run_scenario(&c).unwrap();
        let mut streamed = Vec::new();
        run_with_sink(c, &mut |e| streamed.push(e)).unwrap();
        assert_eq!(streamed, t.events, "{protocol:?}");
    }
}

#[test]
fn trace_round_trips_through_jsonl() {
    let t = run_scenario(&scenario(Protocol::HotstuffLight, 5)).unwrap();
    let text = t.to_jsonl();
    assert_eq!(Trace::parse(&text).unwrap(), t);
}

#[test]
fn config_round_trips_through_json() {
    let c = scenario(Protocol::PbftLight, 9);
    assert_eq!(ScenarioConfig::from_json(&c.to_json_pretty()).unwrap(), c);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn runs_are_deterministic(seed in 0u64..10_000, proto in 0usize..5, drop in 0u32..500) {
        let mut c = scenario(ALL[proto], seed);
        c.horizon = 800;
        c.fault_plan.push(FaultDirective::Drop { permille: drop, from: None, to: None });
        prop_assert_eq!(run_scenario(&c).unwrap().to_jsonl(), run_scenario(&c).unwrap().to_jsonl());
    }

    #[test]
    fn events_are_time_ordered(seed in 0u64..10_000, proto in 0usize..5) {
        let t = run_scenario(&scenario(ALL[proto], seed)).unwrap();
        prop_assert!(t.events.windows(2).all(|w| w[0].t <= w[1].t));
        prop_assert!(t.events.iter().all(|e| e.t <= t.config().horizon));
    }
}
