//! SMR synchronizer properties and its latency bounds.

use std::collections::BTreeMap;

use wishsync_core::msg::Msg;
use wishsync_core::{EventKind, Time, View};

use crate::metrics::Stamp;
use crate::report::Finding;
use crate::Input;

pub fn check(inp: &Input<'_>) -> Vec<Finding> {
    vec![
        monotonicity(inp),
        validity(inp),
        no_skip(inp),
        wish_monotonicity(inp),
        wish_form(inp),
        bounded_entry(inp),
        startup(inp),
        progress(inp),
        late_entry_bound(inp),
        advance_to_entry_bound(inp),
    ]
}

/// Some correct process reaches the configured target view.
pub fn target_view(inp: &Input<'_>) -> Finding {
    const P: &str = "target-view";
    let Some(target) = inp.cfg.checks.target_view else {
        return Finding::na(P, "no target view configured");
    };
    let m = inp.m;
    match m.tm.range(target..).next() {
        Some((v, s)) => Finding::pass(P, 1).with_detail(format!("view {v} at {}", s.0)).with_bound("target", target, m.max_view()),
        None => {
            let last = inp.trace.events.len().saturating_sub(1);
            Finding::fail(P, format!("highest correct view is {}", m.max_view()), vec![inp.witness(last)])
                .with_bound("target", target, m.max_view())
        }
    }
}

pub fn monotonicity(inp: &Input<'_>) -> Finding {
    const P: &str = "monotonicity";
    let mut last: Vec<Option<View>> = vec![None; inp.m.n];
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::EnterView { v } = e.kind else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        checked += 1;
        if let Some(prev) = last[e.pid] {
            if v <= prev {
                return Finding::fail(P, format!("p{} entered {v} after {prev}", e.pid), vec![inp.witness(i)]);
            }
        }
        last[e.pid] = Some(v);
    }
    Finding::pass(P, checked)
}

pub fn validity(inp: &Input<'_>) -> Finding {
    const P: &str = "validity";
    let mut checked = 0;
    for p in inp.m.correct_pids() {
        for (&v, &s) in &inp.m.enter[p] {
            checked += 1;
            let ok = v > 0 && inp.m.tam.get(&(v - 1)).is_some_and(|a| *a < s);
            if !ok {
                return Finding::fail(
                    P,
                    format!("p{p} entered {v} with no earlier correct advance from {}", v.saturating_sub(1)),
                    vec![inp.witness(s.1)],
                );
            }
        }
    }
    Finding::pass(P, checked)
}

pub fn no_skip(inp: &Input<'_>) -> Finding {
    const P: &str = "no-skip";
    let tm = &inp.m.tm;
    for (&v, &s) in tm {
        if v <= 1 {
            continue;
        }
        match tm.get(&(v - 1)) {
            Some(prev) if *prev < s => {}
            _ => {
                return Finding::fail(
                    P,
                    format!("view {v} entered before any correct entry of {}", v - 1),
                    vec![inp.witness(s.1)],
                )
            }
        }
    }
    Finding::pass(P, tm.len())
}

pub fn wish_monotonicity(inp: &Input<'_>) -> Finding {
    const P: &str = "wish-monotonicity";
    let mut last: Vec<View> = vec![0; inp.m.n];
    let mut checked = 0;
    for (i, e) in inp.events() {
        let EventKind::Send { msg, .. } = &e.kind else { continue };
        let Msg::Wish { v } = msg.body else { continue };
        if !inp.is_correct(e.pid) {
            continue;
        }
        checked += 1;
        if v < last[e.pid] {
            return Finding::fail(P, format!("p{} sent WISH({v}) after WISH({})", e.pid, last[e.pid]), vec![inp.witness(i)]);
        }
        last[e.pid] = v;
    }
    Finding::pass(P, checked)
}

/// `(f+1)`-st highest entry.
fn plus_view(max_views: &[View], f: usize) -> View {
    let mut s = max_views.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s[f]
}

/// Every correct WISH(v) has `v` equal to the sender's `view⁺` or one above,
/// with `view⁺` rebuilt from the WISHes it received.
pub fn wish_form(inp: &Input<'_>) -> Finding {
    const P: &str = "wish-form";
    let n = inp.m.n;
    let f = inp.cfg.f;
    let mut max_views = vec![vec![0 as View; n]; n];
    let mut checked = 0;
    for (i, e) in inp.events() {
        if !inp.is_correct(e.pid) {
            continue;
        }
        match &e.kind {
            EventKind::Receive { id, from, .. } => {
                if let Some(Msg::Wish { v }) = inp.sent_msg(*id).map(|m| &m.body) {
                    if *from < n {
                        let slot = &mut max_views[e.pid][*from];
                        *slot = (*slot).max(*v);
                    }
                }
            }
            EventKind::Send { msg, .. } => {
                let Msg::Wish { v } = msg.body else { continue };
                checked += 1;
                let vp = plus_view(&max_views[e.pid], f);
                if v != vp && v != vp + 1 {
                    return Finding::fail(
                        P,
                        format!("p{} sent WISH({v}) while its view+ was {vp}", e.pid),
                        vec![inp.witness(i)],
                    );
                }
            }
            _ => {}
        }
    }
    Finding::pass(P, checked)
}

/// Entry bound `d = 2δ` for every view from the first good view on.
pub fn bounded_entry(inp: &Input<'_>) -> Finding {
    const P: &str = "bounded-entry";
    let m = inp.m;
    let d = 2 * m.delta;
    let first = m.first_good_view();
    let mut checked = 0;
    let mut tightest: Option<(View, Time, Time)> = None;
    for (&v, &tm) in m.tm.range(first..) {
        if tm.0 + d > m.horizon {
            continue;
        }
        if m.tam.get(&v).is_some_and(|a| a.0 < tm.0 + d) {
            continue;
        }
        checked += 1;
        for p in m.correct_pids() {
            match m.enter[p].get(&v) {
                None => {
                    return Finding::fail(P, format!("p{p} never entered {v} (first entry at {})", tm.0), vec![inp.witness(tm.1)])
                        .with_bound(format!("tl({v})"), m.horizon, tm.0 + d);
                }
                Some(s) if s.0 > tm.0 + d => {
                    return Finding::fail(P, format!("p{p} entered {v} late"), vec![inp.witness(s.1)])
                        .with_bound(format!("tl({v})"), s.0, tm.0 + d);
                }
                _ => {}
            }
        }
        let tl = m.tl[&v].0;
        if tightest.is_none_or(|(_, l, r)| r - l > tm.0 + d - tl) {
            tightest = Some((v, tl, tm.0 + d));
        }
    }
    let mut out = Finding::pass(P, checked).with_detail(format!("first good view {first}"));
    if let Some((v, l, r)) = tightest {
        out = out.with_bound(format!("tl({v})"), l, r);
    }
    out
}

/// Deadline for the conclusion of Startup or Progress given the time the
/// premise became true.
fn premise_deadline(inp: &Input<'_>, t: Time) -> Time {
    let m = inp.m;
    let base = if t < m.gst { m.gst + m.rho } else { t };
    base + 2 * m.delta
}

/// `(f+1)`-st earliest stamp, if there are that many.
fn kth(mut stamps: Vec<Stamp>, k: usize) -> Option<Stamp> {
    stamps.sort_unstable();
    stamps.get(k - 1).copied()
}

pub fn startup(inp: &Input<'_>) -> Finding {
    const P: &str = "startup";
    let m = inp.m;
    let adv: Vec<Stamp> = m.correct_pids().filter_map(|p| m.advance[p].get(&0).map(|a| a.0)).collect();
    let Some(t) = kth(adv, inp.cfg.f + 1) else {
        return Finding::na(P, "fewer than f+1 correct processes called advance");
    };
    let deadline = premise_deadline(inp, t.0);
    match m.tm.get(&1) {
        Some(s) if s.0 <= deadline => Finding::pass(P, 1).with_bound("tm(1)", s.0, deadline),
        Some(s) => Finding::fail(P, "view 1 entered late", vec![inp.witness(s.1)]).with_bound("tm(1)", s.0, deadline),
        None if deadline <= m.horizon => {
            Finding::fail(P, "no correct process entered view 1", vec![inp.witness(t.1)]).with_bound("tm(1)", m.horizon, deadline)
        }
        None => Finding::na(P, "horizon ends before the deadline"),
    }
}

pub fn progress(inp: &Input<'_>) -> Finding {
    const P: &str = "progress";
    let m = inp.m;
    let mut checked = 0;
    for &v in m.tm.keys() {
        let adv: Vec<Stamp> = m.correct_pids().filter_map(|p| m.advance[p].get(&v).map(|a| a.0)).collect();
        let Some(t) = kth(adv, inp.cfg.f + 1) else { continue };
        let deadline = premise_deadline(inp, t.0);
        match m.tm.get(&(v + 1)) {
            Some(s) if s.0 <= deadline => checked += 1,
            Some(s) => {
                return Finding::fail(P, format!("view {} entered late", v + 1), vec![inp.witness(s.1)])
                    .with_bound(format!("tm({})", v + 1), s.0, deadline)
            }
            None if deadline <= m.horizon => {
                return Finding::fail(P, format!("no correct process entered view {}", v + 1), vec![inp.witness(t.1)])
                    .with_bound(format!("tm({})", v + 1), m.horizon, deadline)
            }
            None => {}
        }
    }
    if checked == 0 {
        return Finding::na(P, "no view had f+1 correct advances with a deadline inside the horizon");
    }
    Finding::pass(P, checked)
}

/// With an early start, every entry of `v` happens by
/// `max(tm(v), GST+ρ) + 2δ`.
pub fn late_entry_bound(inp: &Input<'_>) -> Finding {
    const P: &str = "late-entry-bound";
    let m = inp.m;
    if !m.early_start() {
        return Finding::na(P, "first advance is not before GST");
    }
    let mut checked = 0;
    let mut tight: Option<(View, Time, Time)> = None;
    for (&v, &tm) in &m.tm {
        let bound = tm.0.max(m.gst + m.rho) + 2 * m.delta;
        for p in m.correct_pids() {
            let Some(s) = m.enter[p].get(&v) else { continue };
            checked += 1;
            if s.0 > bound {
                return Finding::fail(P, format!("p{p} entered {v} late"), vec![inp.witness(s.1)])
                    .with_bound(format!("te({v})"), s.0, bound);
            }
            if tight.is_none_or(|(_, l, r)| r - l > bound - s.0) {
                tight = Some((v, s.0, bound));
            }
        }
    }
    with_tight(Finding::pass(P, checked), tight, "tl")
}

/// `tl(v+1) <= taelast(v) + δ`, or `max(taelast(v), GST+ρ) + δ` after an
/// early start.
pub fn advance_to_entry_bound(inp: &Input<'_>) -> Finding {
    const P: &str = "advance-to-entry-bound";
    let m = inp.m;
    let early = m.early_start();
    let mut checked = 0;
    let mut tight: Option<(View, Time, Time)> = None;
    let entered: BTreeMap<View, Stamp> = m.tl.clone();
    for (&w, &tl) in &entered {
        let v = w - 1;
        let Some(last) = m.taelast(v) else { continue };
        let base = if early { last.0.max(m.gst + m.rho) } else { last.0 };
        let bound = base + m.delta;
        checked += 1;
        if tl.0 > bound {
            return Finding::fail(P, format!("view {w} entered late"), vec![inp.witness(tl.1)])
                .with_bound(format!("tl({w})"), tl.0, bound);
        }
        if tight.is_none_or(|(_, l, r)| r - l > bound - tl.0) {
            tight = Some((w, tl.0, bound));
        }
    }
    if checked == 0 {
        return Finding::na(P, "taelast undefined for every entered view");
    }
    with_tight(Finding::pass(P, checked), tight, "tl")
}

fn with_tight(f: Finding, tight: Option<(View, Time, Time)>, what: &str) -> Finding {
    match tight {
        Some((v, l, r)) => f.with_bound(format!("{what}({v})"), l, r),
        None => f,
    }
}
