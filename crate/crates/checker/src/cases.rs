//! Hand-built violating and passing traces, one pair per property.

use crate::synth::TraceBuilder;
use crate::{check, Verdict};
use wishsync_core::config::Protocol;
use wishsync_core::msg::{Msg, Value, VoteKind};
use wishsync_core::trace::{AdvanceCause, Dest};
use wishsync_core::{EventKind, Trace};

pub type Case = (&'static str, fn(bool) -> Trace);

const ALL: [usize; 4] = [0, 1, 2, 3];

fn booted(protocol: Protocol, gst: u64, horizon: u64) -> TraceBuilder {
    let mut b = TraceBuilder::new(protocol, gst, horizon);
    b.boot(0, 5, &ALL);
    b
}

fn x() -> Value {
    Value::op(1, "x")
}

fn y() -> Value {
    Value::op(2, "y")
}

pub fn monotonicity(bad: bool) -> Trace {
    let mut b = booted(Protocol::ToyClient, 0, 200);
    b.advance(10, 0, 1).enter(20, 0, 2);
    if bad {
        b.enter(30, 0, 1);
    }
    b.build()
}

fn validity(bad: bool) -> Trace {
    let mut b = booted(Protocol::ToyClient, 0, 200);
    if !bad {
        b.advance(10, 1, 1);
    }
    b.enter(20, 0, 2);
    b.build()
}

fn no_skip(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    for p in ALL {
        b.start(0, p).advance(0, p, 0);
    }
    if !bad {
        b.enter(3, 1, 1);
    }
    b.advance(4, 1, 1).enter(5, 0, 2);
    b.build()
}

fn wish_monotonicity(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    let (first, second) = if bad { (3, 2) } else { (2, 3) };
    b.send(10, 0, Dest::To(0), Msg::Wish { v: first });
    b.send(20, 0, Dest::To(0), Msg::Wish { v: second });
    b.build()
}

fn wish_form(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    let id = b.send(10, 0, Dest::To(0), Msg::Wish { v: if bad { 5 } else { 1 } });
    b.receive(10, 0, id, 0, 10);
    b.build()
}

fn bounded_entry(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    for p in ALL {
        b.start(0, p).advance(0, p, 0);
    }
    for p in 0..3 {
        b.enter(5, p, 1);
    }
    b.enter(if bad { 40 } else { 25 }, 3, 1);
    b.build()
}

fn startup(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 100);
    b.start(0, 0).advance(0, 0, 0).start(0, 1).advance(0, 1, 0);
    if !bad {
        b.enter(15, 0, 1);
    }
    b.build()
}

fn progress(bad: bool) -> Trace {
    let mut b = booted(Protocol::ToyClient, 0, 100);
    b.advance(10, 0, 1).advance(10, 1, 1);
    if !bad {
        b.enter(25, 0, 2);
    }
    b.build()
}

fn late_entry_bound(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 100, 400);
    for p in ALL {
        b.start(0, p).advance(0, p, 0);
    }
    for p in 0..3 {
        b.enter(5, p, 1);
    }
    b.enter(if bad { 200 } else { 130 }, 3, 1);
    b.build()
}

fn advance_to_entry_bound(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    for p in ALL {
        b.start(0, p).advance(0, p, 0);
    }
    for p in 0..3 {
        b.enter(10, p, 1);
    }
    b.enter(if bad { 15 } else { 10 }, 3, 1);
    b.build()
}

fn event_order(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    b.start(10, 0).start(if bad { 5 } else { 10 }, 1);
    b.build()
}

fn post_gst_delay(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    let id = b.send(0, 0, Dest::To(1), Msg::Wish { v: 1 });
    b.receive(if bad { 20 } else { 10 }, 1, id, 0, 0);
    b.build()
}

fn unforgeability(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    let vote = b.sign(0, Msg::vote(VoteKind::Prepare, 1, 1, x().digest()));
    if !bad {
        b.send_signed(5, 0, Dest::All, vote.clone());
    }
    b.send_signed(10, 1, Dest::All, vote);
    b.build()
}

fn bounded_space(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ToyClient, 0, 200);
    b.push(10, 0, EventKind::MemSample { sync_entries: if bad { 5 } else { 4 }, future_slots: 0, future_msgs: 0 });
    b.build()
}

fn integrity(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    b.deliver(10, 0, 1, &x());
    b.deliver(20, 0, 2, &if bad { x() } else { y() });
    b.build()
}

fn external_validity(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    let v = if bad { Value::op(1, "invalid-x") } else { x() };
    b.deliver(10, 0, 1, &v);
    b.build()
}

fn ordering(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    b.deliver(10, 0, 1, &x());
    b.deliver(11, 1, 1, &if bad { y() } else { x() });
    b.build()
}

fn liveness(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 500);
    b.cfg().checks.liveness_grace = Some(100);
    b.broadcast(10, 0, &x());
    let n = if bad { 3 } else { 4 };
    for p in 0..n {
        b.deliver(50, p, 1, &x());
    }
    b.build()
}

fn votes(b: &mut TraceBuilder, kind: VoteKind, view: u64, value: &Value, signers: &[usize]) {
    for &p in signers {
        b.send(10 * view, p, Dest::All, Msg::vote(kind, view, 1, value.digest()));
    }
}

fn prepared_uniqueness(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    votes(&mut b, VoteKind::Prepare, 1, &x(), &[0, 1, 2]);
    votes(&mut b, VoteKind::Prepare, 1, &if bad { y() } else { x() }, &[1, 2, 3]);
    b.build()
}

fn committed_prepared(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    if !bad {
        votes(&mut b, VoteKind::Prepare, 1, &x(), &[0, 1, 2]);
    }
    votes(&mut b, VoteKind::Commit, 1, &x(), &[0, 1, 2]);
    b.build()
}

fn commit_agreement(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    votes(&mut b, VoteKind::Prepare, 1, &x(), &[0, 1, 2]);
    votes(&mut b, VoteKind::Commit, 1, &x(), &[0, 1, 2]);
    votes(&mut b, VoteKind::Prepare, 2, &if bad { y() } else { x() }, &[1, 2, 3]);
    b.build()
}

fn committed_uniqueness(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 200);
    votes(&mut b, VoteKind::Commit, 1, &x(), &[0, 1, 2]);
    votes(&mut b, VoteKind::Commit, 2, &if bad { y() } else { x() }, &[1, 2, 3]);
    b.build()
}

fn position_discipline(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftRotation, 0, 200);
    let k = if bad { 3 } else { 2 };
    b.send(10, 0, Dest::All, Msg::vote(VoteKind::Prepare, 1, k, x().digest()));
    b.build()
}

fn cs_local_order(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ConsensusSync, 0, 200);
    let (first, second) = if bad { (2, 1) } else { (1, 2) };
    b.push(10, 0, EventKind::EnterConsensusView { v: first });
    b.push(20, 0, EventKind::EnterConsensusView { v: second });
    b.build()
}

fn cs_duration_gap(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::ConsensusSync, 0, 300);
    b.cfg().view_duration = Some(30);
    for p in ALL {
        b.start(0, p).advance(0, p, 0);
    }
    for p in ALL {
        b.enter(5, p, 1).push(5, p, EventKind::EnterConsensusView { v: 1 });
    }
    for p in ALL {
        b.advance(34, p, 1);
    }
    let t2 = if bad { 30 } else { 40 };
    for p in ALL {
        b.enter(t2, p, 2).push(t2, p, EventKind::EnterConsensusView { v: 2 });
    }
    b.build()
}

fn target_view(bad: bool) -> Trace {
    let mut b = booted(Protocol::ToyClient, 0, 200);
    b.cfg().checks.target_view = Some(if bad { 3 } else { 2 });
    b.advance(10, 0, 1).advance(10, 1, 1).enter(20, 0, 2);
    b.build()
}

fn good_case(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 0, 300);
    b.cfg().latency_mode = true;
    for p in ALL {
        b.start(0, p).advance(0, p, 0);
    }
    for p in ALL {
        b.enter(10, p, 1);
    }
    b.broadcast(20, 1, &x());
    for p in ALL {
        b.deliver(if bad { 70 } else { 60 }, p, 1, &x());
    }
    b.build()
}

fn recovery_bound(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftLight, 100, 1000);
    b.cfg().latency_mode = true;
    b.boot(0, 5, &ALL);
    b.broadcast(50, 0, &x());
    let n = if bad { 3 } else { 4 };
    for p in 0..n {
        b.deliver(300, p, 1, &x());
    }
    b.build()
}

fn rotation_recovery_bound(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftRotation, 100, 1000);
    b.cfg().latency_mode = true;
    b.cfg().init_dur_delivery = 80;
    b.boot(0, 5, &ALL);
    b.advance(200, 0, 1).advance(200, 1, 1);
    for p in ALL {
        b.enter(if bad && p == 3 { 400 } else { 300 }, p, 2);
    }
    b.build()
}

fn crashed_leader(bad: bool) -> Trace {
    let mut b = TraceBuilder::new(Protocol::PbftRotation, 0, 1000);
    b.cfg().faulty_set = vec![2];
    b.cfg().init_dur_delivery = 80;
    let correct = [0, 1, 3];
    b.boot(0, 5, &correct);
    for (v, t) in [(1, 30), (2, 60)] {
        for p in correct {
            b.advance_by(t, p, v, AdvanceCause::Batch);
        }
        for p in correct {
            b.enter(t + 5, p, v + 1);
        }
    }
    for p in correct {
        b.advance_by(145, p, 3, AdvanceCause::Timer);
    }
    for p in correct {
        b.enter(if bad && p == 3 { 160 } else { 150 }, p, 4);
    }
    b.build()
}

pub const CASES: &[Case] = &[
    ("monotonicity", monotonicity),
    ("validity", validity),
    ("no-skip", no_skip),
    ("wish-monotonicity", wish_monotonicity),
    ("wish-form", wish_form),
    ("bounded-entry", bounded_entry),
    ("startup", startup),
    ("progress", progress),
    ("late-entry-bound", late_entry_bound),
    ("advance-to-entry-bound", advance_to_entry_bound),
    ("event-order", event_order),
    ("post-gst-delay", post_gst_delay),
    ("unforgeability", unforgeability),
    ("bounded-space", bounded_space),
    ("integrity", integrity),
    ("external-validity", external_validity),
    ("ordering", ordering),
    ("liveness", liveness),
    ("prepared-uniqueness", prepared_uniqueness),
    ("committed-prepared", committed_prepared),
    ("commit-agreement", commit_agreement),
    ("committed-uniqueness", committed_uniqueness),
    ("position-discipline", position_discipline),
    ("cs-local-order", cs_local_order),
    ("cs-duration-gap", cs_duration_gap),
    ("target-view", target_view),
    ("good-case", good_case),
    ("recovery-bound", recovery_bound),
    ("rotation-recovery-bound", rotation_recovery_bound),
    ("crashed-leader", crashed_leader),
];

/// Runs every case; returns `(property, flags violation, accepts good)`.
pub fn outcomes() -> Vec<(&'static str, bool, bool)> {
    CASES
        .iter()
        .map(|(prop, build)| {
            let bad = check(&build(true));
            let good = check(&build(false));
            let fb = bad.get(prop).unwrap_or_else(|| panic!("{prop} missing from report"));
            let fg = good.get(prop).unwrap();
            let flagged = fb.verdict == Verdict::Fail && !fb.witness.is_empty();
            let accepted = fg.verdict == Verdict::Pass;
            (*prop, flagged, accepted)
        })
        .collect()
}
