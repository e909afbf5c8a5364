//! Harness-level properties: network timing, signatures, storage, ordering.

use std::collections::{HashMap, HashSet};

use wishsync_core::msg::{KeyRing, Signed, SignedMsg};
use wishsync_core::trace::Dest;
use wishsync_core::{EventKind, Pid, Time, TraceEvent};

use crate::report::Finding;
use crate::Input;

pub fn check(inp: &Input<'_>) -> Vec<Finding> {
    vec![event_order(inp), post_gst_delay(inp), unforgeability(inp), bounded_space(inp)]
}

pub fn event_order(inp: &Input<'_>) -> Finding {
    const P: &str = "event-order";
    let mut prev: Time = 0;
    for (i, e) in inp.events() {
        if e.t < prev {
            return Finding::fail(P, format!("time goes back from {prev} to {}", e.t), vec![inp.witness(i)]);
        }
        prev = e.t;
    }
    Finding::pass(P, inp.trace.events.len())
}

/// Messages sent at or after GST arrive within δ; messages between correct
/// processes sent at or after GST are never lost.
pub fn post_gst_delay(inp: &Input<'_>) -> Finding {
    const P: &str = "post-gst-delay";
    let m = inp.m;
    let mut received: HashSet<(u64, Pid)> = HashSet::new();
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::Receive { id, sent_at, .. } = e.kind else { continue };
        received.insert((id, e.pid));
        if sent_at < m.gst {
            continue;
        }
        checked += 1;
        if e.t < sent_at || e.t - sent_at > m.delta {
            return Finding::fail(P, format!("message {id} took {} ticks", e.t.wrapping_sub(sent_at)), vec![inp.witness(i)])
                .with_bound("delay", e.t.wrapping_sub(sent_at), m.delta);
        }
    }
    for (i, e) in inp.events() {
        let EventKind::Send { id, dest, .. } = e.kind else { continue };
        if e.t < m.gst || e.t + m.delta > m.horizon || !inp.is_correct(e.pid) {
            continue;
        }
        let dests: Vec<Pid> = match dest {
            Dest::All => (0..m.n).collect(),
            Dest::To(p) => vec![p],
        };
        for p in dests.into_iter().filter(|&p| inp.is_correct(p)) {
            if !received.contains(&(id, p)) {
                return Finding::fail(P, format!("message {id} to p{p} was never received"), vec![inp.witness(i)]);
            }
        }
    }
    Finding::pass(P, checked)
}

fn walk<'a>(m: &'a SignedMsg, out: &mut Vec<&'a SignedMsg>) {
    out.push(m);
    for inner in m.body.embedded() {
        walk(inner, out);
    }
}

/// All signed messages in a send, including nested certificates.
pub fn signed_in(e: &TraceEvent) -> Vec<&SignedMsg> {
    let mut out = Vec::new();
    if let EventKind::Send { msg, .. } = &e.kind {
        walk(msg, &mut out);
    }
    out
}

/// Every signature verifies, and a message signed by a correct process is
/// first sent by that process before anyone else relays it.
pub fn unforgeability(inp: &Input<'_>) -> Finding {
    const P: &str = "unforgeability";
    let keys = KeyRing::new(inp.cfg.n, inp.cfg.seed);
    let mut originated: HashSet<&Signed> = HashSet::new();
    let mut checked = 0;
    for (i, e) in inp.events() {
        for s in signed_in(e) {
            checked += 1;
            if !keys.verify(s) {
                return Finding::fail(P, format!("bad signature claiming p{}", s.signer), vec![inp.witness(i)]);
            }
            if s.signer == e.pid {
                originated.insert(s);
            } else if inp.is_correct(s.signer) && !originated.contains(&**s) {
                return Finding::fail(
                    P,
                    format!("p{} relayed a p{} message p{} never sent", e.pid, s.signer, s.signer),
                    vec![inp.witness(i)],
                );
            }
        }
    }
    Finding::pass(P, checked)
}

/// Number of message types that can be buffered for a future view.
pub const FUTURE_TYPES: usize = 6;

/// Streaming fold for storage bounds, usable without keeping the trace.
#[derive(Clone, Debug, Default)]
pub struct SpaceFold {
    pub n: usize,
    pub max_sync_entries: usize,
    pub max_future_slots: usize,
    pub max_future_msgs: usize,
    pub samples: usize,
    pub violation: Option<(usize, TraceEvent)>,
}

impl SpaceFold {
    pub fn new(n: usize) -> Self {
        SpaceFold { n, ..Default::default() }
    }

    pub fn observe(&mut self, index: usize, e: &TraceEvent) {
        let EventKind::MemSample { sync_entries, future_slots, future_msgs } = e.kind else { return };
        self.samples += 1;
        self.max_sync_entries = self.max_sync_entries.max(sync_entries);
        self.max_future_slots = self.max_future_slots.max(future_slots);
        self.max_future_msgs = self.max_future_msgs.max(future_msgs);
        if self.violation.is_none() && (sync_entries > self.n || future_slots > FUTURE_TYPES * self.n) {
            self.violation = Some((index, e.clone()));
        }
    }

    pub fn finding(&self) -> Finding {
        const P: &str = "bounded-space";
        let detail = format!(
            "max view entries {}, max buffer slots {}, max buffered messages {}",
            self.max_sync_entries, self.max_future_slots, self.max_future_msgs
        );
        match &self.violation {
            Some((index, event)) => Finding::fail(P, detail, vec![crate::report::Witness { index: *index, event: event.clone() }]),
            None if self.samples == 0 => Finding::na(P, "no storage samples"),
            None => Finding::pass(P, self.samples)
                .with_detail(detail)
                .with_bound("buffer slots", self.max_future_slots as u64, (FUTURE_TYPES * self.n) as u64),
        }
    }
}

pub fn bounded_space(inp: &Input<'_>) -> Finding {
    let mut fold = SpaceFold::new(inp.cfg.n);
    for (i, e) in inp.events() {
        if inp.is_correct(e.pid) {
            fold.observe(i, e);
        }
    }
    fold.finding()
}

/// Index of sends by message id.
pub fn send_index(events: &[TraceEvent]) -> HashMap<u64, usize> {
    events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e.kind {
            EventKind::Send { id, .. } => Some((id, i)),
            _ => None,
        })
        .collect()
}
