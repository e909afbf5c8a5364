//! Atomic broadcast properties and certificate cross-checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use wishsync_core::msg::{Digest, KeyRing, Value, VoteKind};
use wishsync_core::{EventKind, Pid, Pos, Time, View};

use crate::infra::signed_in;
use crate::report::Finding;
use crate::Input;

pub fn check(inp: &Input<'_>) -> Vec<Finding> {
    let votes = Votes::collect(inp);
    vec![
        integrity(inp),
        external_validity(inp),
        ordering(inp),
        liveness(inp),
        votes.prepared_uniqueness(inp),
        votes.committed_prepared(inp),
        votes.commit_agreement(inp),
        votes.committed_uniqueness(inp),
        position_discipline(inp),
    ]
}

/// Each value at most once and each position at most once per process.
pub fn integrity(inp: &Input<'_>) -> Finding {
    const P: &str = "integrity";
    let mut values: HashMap<(Pid, Value), usize> = HashMap::new();
    let mut positions: HashMap<(Pid, Pos), usize> = HashMap::new();
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::Deliver { position, value } = &e.kind else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        checked += 1;
        if let Some(&j) = values.get(&(e.pid, value.clone())) {
            return Finding::fail(P, format!("p{} delivered {value:?} twice", e.pid), vec![inp.witness(j), inp.witness(i)]);
        }
        if let Some(&j) = positions.get(&(e.pid, *position)) {
            return Finding::fail(P, format!("p{} delivered position {position} twice", e.pid), vec![inp.witness(j), inp.witness(i)]);
        }
        values.insert((e.pid, value.clone()), i);
        positions.insert((e.pid, *position), i);
    }
    Finding::pass(P, checked)
}

/// Only valid, non-filler values are delivered.
pub fn external_validity(inp: &Input<'_>) -> Finding {
    const P: &str = "external-validity";
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::Deliver { value, .. } = &e.kind else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        checked += 1;
        if value.is_nop() || !value.valid() {
            return Finding::fail(P, format!("p{} delivered {value:?}", e.pid), vec![inp.witness(i)]);
        }
    }
    Finding::pass(P, checked)
}

/// Correct processes agree on the value at each position and deliver
/// positions in increasing order.
pub fn ordering(inp: &Input<'_>) -> Finding {
    const P: &str = "ordering";
    let mut at: HashMap<Pos, (usize, Value)> = HashMap::new();
    let mut last: Vec<Pos> = vec![0; inp.m.n];
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::Deliver { position, value } = &e.kind else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        checked += 1;
        if *position <= last[e.pid] {
            return Finding::fail(
                P,
                format!("p{} delivered position {position} after {}", e.pid, last[e.pid]),
                vec![inp.witness(i)],
            );
        }
        last[e.pid] = *position;
        match at.get(position) {
            Some((j, x)) if x != value => {
                return Finding::fail(P, format!("position {position} holds two values"), vec![inp.witness(*j), inp.witness(i)])
            }
            Some(_) => {}
            None => {
                at.insert(*position, (i, value.clone()));
            }
        }
    }
    Finding::pass(P, checked)
}

/// Every value broadcast by a correct process is delivered by all correct
/// processes within the configured grace period after `max(t, GST)`.
pub fn liveness(inp: &Input<'_>) -> Finding {
    const P: &str = "liveness";
    let Some(grace) = inp.cfg.checks.liveness_grace else {
        return Finding::na(P, "no liveness grace configured");
    };
    let m = inp.m;
    let mut delivered: HashMap<(Pid, Value), Time> = HashMap::new();
    for e in &inp.trace.events {
        if let EventKind::Deliver { value, .. } = &e.kind {
            delivered.entry((e.pid, value.clone())).or_insert(e.t);
        }
    }
    let mut checked = 0;
    let mut tight: Option<(Time, Time)> = None;
    for (i, e) in inp.events() {
        let EventKind::BroadcastCall { value } = &e.kind else { continue };
        if !inp.is_correct(e.pid) || !value.valid() {
            continue;
        }
        let deadline = e.t.max(m.gst) + grace;
        if deadline > m.horizon {
            continue;
        }
        checked += 1;
        for p in m.correct_pids() {
            match delivered.get(&(p, value.clone())) {
                Some(&t) if t <= deadline => {
                    if tight.is_none_or(|(l, r)| r - l > deadline - t) {
                        tight = Some((t, deadline));
                    }
                }
                Some(&t) => {
                    return Finding::fail(P, format!("p{p} delivered {value:?} late"), vec![inp.witness(i)])
                        .with_bound("delivery", t, deadline)
                }
                None => {
                    return Finding::fail(P, format!("p{p} never delivered {value:?}"), vec![inp.witness(i)])
                        .with_bound("delivery", m.horizon, deadline)
                }
            }
        }
    }
    if checked == 0 {
        return Finding::na(P, "no correct broadcast with a deadline inside the horizon");
    }
    let f = Finding::pass(P, checked);
    match tight {
        Some((l, r)) => f.with_bound("delivery", l, r),
        None => f,
    }
}

/// Correct processes only vote for positions inside their view's batch.
pub fn position_discipline(inp: &Input<'_>) -> Finding {
    const P: &str = "position-discipline";
    if !inp.cfg.protocol.is_batched() {
        return Finding::na(P, "protocol has no batches");
    }
    let b = inp.cfg.batch;
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::Send { msg, .. } = &e.kind else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        let Some((VoteKind::Prepare, v, k, _)) = msg.body.as_vote() else { continue };
        checked += 1;
        if k > v * b {
            return Finding::fail(P, format!("p{} prepared position {k} in view {v}", e.pid), vec![inp.witness(i)])
                .with_bound("position", k, v * b);
        }
    }
    Finding::pass(P, checked)
}

type VoteKey = (VoteKind, View, Pos);

/// Distinct valid signers per vote, over every signed vote observed anywhere
/// in the trace, with the index of the first event carrying it.
struct Votes {
    q: usize,
    by: BTreeMap<VoteKey, BTreeMap<Digest, (BTreeSet<Pid>, usize)>>,
}

impl Votes {
    fn collect(inp: &Input<'_>) -> Votes {
        let keys = KeyRing::new(inp.cfg.n, inp.cfg.seed);
        let mut by: BTreeMap<VoteKey, BTreeMap<Digest, (BTreeSet<Pid>, usize)>> = BTreeMap::new();
        for (i, e) in inp.events() {
            for s in signed_in(e) {
                let Some((kind, v, k, h)) = s.body.as_vote() else { continue };
                if !keys.verify(s) {
                    continue;
                }
                let slot = by.entry((kind, v, k)).or_default().entry(h.clone()).or_insert_with(|| (BTreeSet::new(), i));
                slot.0.insert(s.signer);
            }
        }
        Votes { q: inp.cfg.quorum(), by }
    }

    /// Hashes with a quorum certificate for `(kind, v, k)`.
    fn certified(&self, kind: VoteKind, v: View, k: Pos) -> impl Iterator<Item = (&Digest, usize)> {
        self.by
            .get(&(kind, v, k))
            .into_iter()
            .flatten()
            .filter(|(_, (s, _))| s.len() >= self.q)
            .map(|(h, (_, i))| (h, *i))
    }

    fn all_certified(&self, kind: VoteKind) -> Vec<(View, Pos, Digest, usize)> {
        let mut out = Vec::new();
        for (&(kd, v, k), hs) in &self.by {
            if kd != kind {
                continue;
            }
            for (h, (s, i)) in hs {
                if s.len() >= self.q {
                    out.push((v, k, h.clone(), *i));
                }
            }
        }
        out
    }

    fn prepared_uniqueness(&self, inp: &Input<'_>) -> Finding {
        const P: &str = "prepared-uniqueness";
        let prepared = self.all_certified(VoteKind::Prepare);
        let mut seen: HashMap<(View, Pos), (Digest, usize)> = HashMap::new();
        for (v, k, h, i) in &prepared {
            if let Some((h0, j)) = seen.get(&(*v, *k)) {
                if h0 != h {
                    return Finding::fail(
                        P,
                        format!("two values prepared at position {k} in view {v}"),
                        vec![inp.witness(*j), inp.witness(*i)],
                    );
                }
            }
            seen.insert((*v, *k), (h.clone(), *i));
        }
        Finding::pass(P, prepared.len())
    }

    fn committed_prepared(&self, inp: &Input<'_>) -> Finding {
        const P: &str = "committed-prepared";
        let committed = self.all_certified(VoteKind::Commit);
        for (v, k, h, i) in &committed {
            if !self.certified(VoteKind::Prepare, *v, *k).any(|(h2, _)| h2 == h) {
                return Finding::fail(P, format!("position {k} committed in view {v} without a prepare quorum"), vec![
                    inp.witness(*i),
                ]);
            }
        }
        Finding::pass(P, committed.len())
    }

    /// A committed value and any value prepared in the same or a later view
    /// at that position coincide.
    fn commit_agreement(&self, inp: &Input<'_>) -> Finding {
        const P: &str = "commit-agreement";
        let committed = self.all_certified(VoteKind::Commit);
        let prepared = self.all_certified(VoteKind::Prepare);
        let mut checked = 0;
        for (v, k, h, i) in &committed {
            for (v2, k2, h2, j) in &prepared {
                if k2 != k || v2 < v {
                    continue;
                }
                checked += 1;
                if h2 != h {
                    return Finding::fail(
                        P,
                        format!("position {k} committed in view {v} but another value prepared in view {v2}"),
                        vec![inp.witness(*i), inp.witness(*j)],
                    );
                }
            }
        }
        Finding::pass(P, checked)
    }

    fn committed_uniqueness(&self, inp: &Input<'_>) -> Finding {
        const P: &str = "committed-uniqueness";
        let committed = self.all_certified(VoteKind::Commit);
        let mut seen: HashMap<Pos, (Digest, usize)> = HashMap::new();
        for (_, k, h, i) in &committed {
            if let Some((h0, j)) = seen.get(k) {
                if h0 != h {
                    return Finding::fail(P, format!("two values committed at position {k}"), vec![
                        inp.witness(*j),
                        inp.witness(*i),
                    ]);
                }
            }
            seen.insert(*k, (h.clone(), *i));
        }
        Finding::pass(P, committed.len())
    }
}
