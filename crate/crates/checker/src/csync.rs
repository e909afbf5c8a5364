//! Consensus synchronizer properties over `EnterConsensusView` events.

use std::collections::BTreeMap;

use wishsync_core::{EventKind, View};

use crate::metrics::Stamp;
use crate::report::Finding;
use crate::Input;

struct CsViews {
    enter: Vec<BTreeMap<View, Stamp>>,
    first: BTreeMap<View, Stamp>,
    last: BTreeMap<View, Stamp>,
}

fn collect(inp: &Input<'_>) -> CsViews {
    let n = inp.m.n;
    let mut enter = vec![BTreeMap::new(); n];
    for (i, e) in inp.events() {
        if let EventKind::EnterConsensusView { v } = e.kind {
            if inp.is_correct(e.pid) {
                enter[e.pid].entry(v).or_insert((e.t, i));
            }
        }
    }
    let mut first = BTreeMap::new();
    let mut last = BTreeMap::new();
    for m in &enter {
        for (&v, &s) in m {
            let lo = first.entry(v).or_insert(s);
            *lo = (*lo).min(s);
            let hi = last.entry(v).or_insert(s);
            *hi = (*hi).max(s);
        }
    }
    CsViews { enter, first, last }
}

/// The smallest view at or above the first good view that is first entered
/// after GST and whose duration covers the entry spread.
pub fn witness_view(inp: &Input<'_>) -> Option<View> {
    let cs = collect(inp);
    witness_in(inp, &cs)
}

fn witness_in(inp: &Input<'_>, cs: &CsViews) -> Option<View> {
    let m = inp.m;
    let d = 2 * m.delta;
    cs.first
        .range(m.first_good_view()..)
        .find(|(&v, s)| s.0 >= m.gst && inp.cfg.view_duration_of(v) >= d)
        .map(|(&v, _)| v)
}

pub fn check(inp: &Input<'_>) -> Vec<Finding> {
    let cs = collect(inp);
    let mut out = vec![local_order(inp)];
    let Some(w) = witness_in(inp, &cs) else {
        for p in ["cs-after-gst", "cs-all-enter", "cs-bounded-entry", "cs-duration-gap"] {
            out.push(Finding::na(p, "no witness view inside the horizon"));
        }
        return out;
    };
    let m = inp.m;
    let d = 2 * m.delta;
    let first_w = cs.first[&w];
    out.push(if first_w.0 >= m.gst {
        Finding::pass("cs-after-gst", 1).with_detail(format!("witness view {w}")).with_bound(
            format!("GST vs first entry of {w}"),
            m.gst,
            first_w.0,
        )
    } else {
        Finding::fail("cs-after-gst", format!("witness view {w} entered before GST"), vec![inp.witness(first_w.1)])
    });

    let top = cs.first.keys().next_back().copied().unwrap_or(w);
    let mut all = Finding::pass("cs-all-enter", 0);
    let mut spread = Finding::pass("cs-bounded-entry", 0);
    let mut gap = Finding::pass("cs-duration-gap", 0);
    for v in w..=top {
        let Some(&first) = cs.first.get(&v) else {
            let prev = cs.first[&(v - 1)];
            all = Finding::fail("cs-all-enter", format!("no correct process entered {v}"), vec![inp.witness(prev.1)]);
            break;
        };
        if first.0 + d <= m.horizon && all.verdict == crate::Verdict::Pass {
            all.checked += 1;
            if let Some(p) = m.correct_pids().find(|&p| !cs.enter[p].contains_key(&v)) {
                all = Finding::fail("cs-all-enter", format!("p{p} never entered {v}"), vec![inp.witness(first.1)]);
            }
        }
        let last = cs.last[&v];
        if spread.verdict == crate::Verdict::Pass {
            spread.checked += 1;
            if last.0 > first.0 + d {
                spread = Finding::fail("cs-bounded-entry", format!("view {v} spread too wide"), vec![inp.witness(last.1)])
                    .with_bound(format!("tl({v})"), last.0, first.0 + d);
            }
        }
        if let Some(&next) = cs.first.get(&(v + 1)) {
            let bound = first.0 + inp.cfg.view_duration_of(v);
            if gap.verdict == crate::Verdict::Pass {
                gap.checked += 1;
                if next.0 <= bound {
                    gap = Finding::fail("cs-duration-gap", format!("view {} entered too early", v + 1), vec![inp.witness(next.1)])
                        .with_bound(format!("F({v}) + tm({v}) < tm({})", v + 1), next.0, bound);
                }
            }
        }
    }
    out.extend([all, spread, gap]);
    out
}

pub fn local_order(inp: &Input<'_>) -> Finding {
    const P: &str = "cs-local-order";
    let mut last: Vec<Option<View>> = vec![None; inp.m.n];
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::EnterConsensusView { v } = e.kind else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        checked += 1;
        if last[e.pid].is_some_and(|prev| v <= prev) {
            return Finding::fail(P, format!("p{} entered consensus view {v} out of order", e.pid), vec![inp.witness(i)]);
        }
        last[e.pid] = Some(v);
    }
    Finding::pass(P, checked)
}
