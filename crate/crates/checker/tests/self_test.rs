//! Every property flags a hand-built violation and accepts a matching
//! well-behaved trace.

use wishsync_checker::cases::{monotonicity, outcomes, CASES};
use wishsync_checker::synth::TraceBuilder;
use wishsync_checker::{check, Verdict};
use wishsync_core::config::Protocol;
use wishsync_core::msg::Msg;
use wishsync_core::trace::Dest;
use wishsync_core::Trace;

#[test]
fn every_property_flags_its_violation_and_accepts_its_passing_trace() {
    let results = outcomes();
    assert!(results.len() >= 12);
    let broken: Vec<_> = results.iter().filter(|(_, f, a)| !f || !a).collect();
    assert!(broken.is_empty(), "{broken:?}");
}

#[test]
fn checker_is_pure() {
    for (_, build) in CASES {
        let t = build(true);
        assert_eq!(check(&t), check(&t));
    }
}

#[test]
fn bad_signature_is_flagged() {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    let mut forged = (*b.sign(0, Msg::Wish { v: 1 })).clone();
    forged.sig ^= 1;
    b.send_signed(5, 0, Dest::All, forged.into());
    let r = check(&b.build());
    assert_eq!(r.verdict("unforgeability"), Some(Verdict::Fail));
}

#[test]
fn corpus_monotonicity_violation_is_flagged() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/corpus/monotonicity-violation.jsonl");
    let text = std::fs::read_to_string(path).unwrap();
    let trace = Trace::parse(&text).unwrap();
    assert_eq!(trace, monotonicity(true));
    let r = check(&trace);
    assert_eq!(r.verdict("monotonicity"), Some(Verdict::Fail));
}

#[test]
#[ignore = "regenerates the corpus file"]
fn write_corpus() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/corpus/monotonicity-violation.jsonl");
    std::fs::write(path, monotonicity(true).to_jsonl()).unwrap();
}
