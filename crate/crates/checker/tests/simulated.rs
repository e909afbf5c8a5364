//! Simulator output passes every applicable property.

use proptest::prelude::*;
use wishsync_checker::{check, properties, Verdict};
use wishsync_core::config::{ClientOp, FaultDirective, Protocol};
use wishsync_core::{run_scenario, ScenarioConfig};

#[test]
fn simulated_runs_pass_every_property() {
    for protocol in PROTOCOLS {
        for latency_mode in [false, true] {
            let mut c = ScenarioConfig::baseline(protocol, 1, 7);
            c.horizon = 1500;
            c.gst = 100;
            c.latency_mode = latency_mode;
            c.faulty_set = vec![1];
            c.checks.liveness_grace = Some(600);
            for i in 0..6 {
                c.broadcasts.push(ClientOp { pid: [0, 2, 3][i as usize % 3], t: 20 * i + 5, id: i + 1, payload: None });
            }
            let t = run_scenario(&c).unwrap();
            let r = check(&t);
            assert!(r.passed(), "{protocol:?} latency_mode={latency_mode}\n{}", r.table());
            let ids: Vec<&str> = r.findings.iter().map(|f| f.property.as_str()).collect();
            assert_eq!(ids, properties(protocol));
            assert!(r.findings.iter().filter(|f| f.verdict == Verdict::Pass).count() >= 10);
        }
    }
}

const PROTOCOLS: [Protocol; 5] = [
    Protocol::PbftLight,
    Protocol::PbftRotation,
    Protocol::HotstuffLight,
    Protocol::ToyClient,
    Protocol::ConsensusSync,
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn no_property_fails_on_random_runs(
        seed in 0u64..1_000_000,
        proto in 0usize..5,
        latency_mode: bool,
        gst in 0u64..400,
        drop in 0u32..600,
        delay in 0u64..200,
        faulty in 0usize..4,
        starts in proptest::collection::vec(0u64..300, 4),
    ) {
        let mut c = ScenarioConfig::baseline(PROTOCOLS[proto], 1, seed);
        c.gst = gst;
        c.horizon = gst + 1500;
        c.latency_mode = latency_mode;
        c.faulty_set = vec![faulty];
        c.start_times = starts;
        c.fault_plan.push(FaultDirective::Drop { permille: drop, from: None, to: None });
        c.fault_plan.push(FaultDirective::Delay { max: delay });
        for i in 0..5u64 {
            let pid = (faulty + 1 + i as usize % 3) % 4;
            c.broadcasts.push(ClientOp { pid, t: 40 * i, id: i + 1, payload: None });
        }
        let r = check(&run_scenario(&c).unwrap());
        prop_assert!(r.passed(), "{}", r.table());
    }
}
