//! Latency bounds of the replication protocols, each guarded by its premises.

use std::collections::HashMap;

use wishsync_core::config::{Behavior, Protocol};
use wishsync_core::msg::{leader, Value};
use wishsync_core::trace::AdvanceCause;
use wishsync_core::{EventKind, Pid, Time, View};

use crate::report::Finding;
use crate::Input;

pub fn check(inp: &Input<'_>) -> Vec<Finding> {
    match inp.cfg.protocol {
        Protocol::PbftLight => vec![recovery_bound(inp), good_case(inp)],
        Protocol::PbftRotation => vec![rotation_recovery_bound(inp), crashed_leader(inp)],
        _ => Vec::new(),
    }
}

/// Timeout durations `(recovery, delivery)` of `p` just after real time `t`,
/// replayed from its timer-caused advances.
pub fn durations_at(inp: &Input<'_>, p: Pid, t: Time) -> (Time, Time) {
    let cfg = inp.cfg;
    let (cap_r, cap_d) = cfg.duration_caps();
    let grow = |d: Time, cap: Time| {
        if !cfg.latency_mode {
            d + cfg.tau
        } else if d >= cap {
            d
        } else {
            (d + cfg.tau).min(cap)
        }
    };
    let (mut r, mut d) = (cfg.init_dur_recovery, cfg.init_dur_delivery);
    for e in &inp.trace.events {
        if e.t > t {
            break;
        }
        if e.pid == p && matches!(e.kind, EventKind::AdvanceCall { cause: AdvanceCause::Timer, .. }) {
            r = grow(r, cap_r);
            d = grow(d, cap_d);
        }
    }
    (r, d)
}

fn all_start_before_gst(inp: &Input<'_>) -> bool {
    inp.m.correct_pids().all(|p| inp.m.start[p].is_some_and(|s| s.0 < inp.m.gst))
}

fn all_start_after_gst(inp: &Input<'_>) -> bool {
    inp.m.correct_pids().all(|p| inp.m.start_time(inp.cfg, p) >= inp.m.gst)
}

/// Every correct process's durations at GST exceed the given bounds.
fn timeouts_at_gst(inp: &Input<'_>, rec: Time, del: Time) -> Result<(), String> {
    for p in inp.m.correct_pids() {
        let (r, d) = durations_at(inp, p, inp.m.gst);
        if r <= rec || d <= del {
            return Err(format!("p{p} has durations ({r}, {d}) at GST, need above ({rec}, {del})"));
        }
    }
    Ok(())
}

fn first_delivery(inp: &Input<'_>) -> HashMap<(Pid, Value), Time> {
    let mut out = HashMap::new();
    for e in &inp.trace.events {
        if let EventKind::Deliver { value, .. } = &e.kind {
            out.entry((e.pid, value.clone())).or_insert(e.t);
        }
    }
    out
}

/// Checks that every correct process delivers each `(broadcast index,
/// value, deadline)` in time.
fn deliveries_by(inp: &Input<'_>, name: &str, items: &[(usize, Value, Time)]) -> Finding {
    let dl = first_delivery(inp);
    let mut tight: Option<(Time, Time)> = None;
    for (i, x, deadline) in items {
        for p in inp.m.correct_pids() {
            match dl.get(&(p, x.clone())) {
                Some(&t) if t <= *deadline => {
                    if tight.is_none_or(|(l, r)| r - l > deadline - t) {
                        tight = Some((t, *deadline));
                    }
                }
                Some(&t) => {
                    return Finding::fail(name, format!("p{p} delivered {x:?} late"), vec![inp.witness(*i)])
                        .with_bound("delivery", t, *deadline)
                }
                None => {
                    return Finding::fail(name, format!("p{p} never delivered {x:?}"), vec![inp.witness(*i)])
                        .with_bound("delivery", inp.m.horizon, *deadline)
                }
            }
        }
    }
    let f = Finding::pass(name, items.len());
    match tight {
        Some((l, r)) => f.with_bound("delivery", l, r),
        None => f,
    }
}

/// All correct processes entered `v` by `bound`.
#[allow(clippy::result_large_err)]
fn all_entered_by(inp: &Input<'_>, name: &str, v: View, bound: Time) -> Result<Time, Finding> {
    let m = inp.m;
    let mut latest = 0;
    for p in m.correct_pids() {
        match m.enter[p].get(&v) {
            Some(s) if s.0 <= bound => latest = latest.max(s.0),
            Some(s) => {
                return Err(Finding::fail(name, format!("p{p} entered {v} late"), vec![inp.witness(s.1)])
                    .with_bound(format!("tl({v})"), s.0, bound))
            }
            None => {
                let w = m.tm.get(&v).map_or(inp.trace.events.len().saturating_sub(1), |s| s.1);
                return Err(Finding::fail(name, format!("p{p} never entered {v}"), vec![inp.witness(w)])
                    .with_bound(format!("tl({v})"), m.horizon, bound));
            }
        }
    }
    Ok(latest)
}

/// Recovery after an asynchronous start: values broadcast before GST are
/// delivered by `GST+ρ+max{ρ+δ,6Δ}+4Δ+max{ρ,δ}+7δ`.
pub fn recovery_bound(inp: &Input<'_>) -> Finding {
    const P: &str = "recovery-bound";
    let (cfg, m) = (inp.cfg, inp.m);
    if !cfg.latency_mode {
        return Finding::na(P, "latency mode is off");
    }
    if !all_start_before_gst(inp) {
        return Finding::na(P, "some correct process does not start before GST");
    }
    let (delta, cap, rho) = (m.delta, cfg.delta_cap, m.rho);
    if let Err(why) = timeouts_at_gst(inp, 6 * delta, 4 * delta) {
        return Finding::na(P, why);
    }
    let good = m.first_good_view();
    if cfg.is_faulty(leader(good, cfg.n)) {
        return Finding::na(P, format!("leader of first good view {good} is faulty"));
    }
    let bound = m.gst + rho + (rho + delta).max(6 * cap) + 4 * cap + rho.max(delta) + 7 * delta;
    if bound > m.horizon {
        return Finding::na(P, format!("bound {bound} beyond horizon"));
    }
    let items: Vec<(usize, Value, Time)> = inp
        .events()
        .filter_map(|(i, e)| match &e.kind {
            EventKind::BroadcastCall { value } if inp.is_correct(e.pid) && e.t < m.gst && value.valid() => {
                Some((i, value.clone(), bound))
            }
            _ => None,
        })
        .collect();
    if items.is_empty() {
        return Finding::na(P, "no correct broadcast before GST");
    }
    deliveries_by(inp, P, &items).with_detail(format!("first good view {good}"))
}

/// Start after GST: view 1 is good, entered by `taelast(0)+δ`, and values
/// are delivered by `max{t, taelast(0)+δ}+4δ` under a correct first leader.
pub fn good_case(inp: &Input<'_>) -> Finding {
    const P: &str = "good-case";
    let (cfg, m) = (inp.cfg, inp.m);
    if !cfg.latency_mode {
        return Finding::na(P, "latency mode is off");
    }
    if !all_start_after_gst(inp) {
        return Finding::na(P, "some correct process starts before GST");
    }
    if cfg.init_dur_recovery <= 5 * m.delta || cfg.init_dur_delivery <= 4 * m.delta {
        return Finding::na(P, "initial timeouts not above 5δ and 4δ");
    }
    let Some(t0) = m.taelast(0) else {
        return Finding::na(P, "some correct process never left view 0");
    };
    let good = m.first_good_view();
    if good != 1 {
        let w = m.tam.get(&0).map_or(0, |s| s.1);
        return Finding::fail(P, format!("first good view is {good}"), vec![inp.witness(w)]);
    }
    let entry = t0.0 + m.delta;
    if entry > m.horizon {
        return Finding::na(P, "horizon ends before view 1 is due");
    }
    if let Err(f) = all_entered_by(inp, P, 1, entry) {
        return f;
    }
    if cfg.is_faulty(leader(1, cfg.n)) {
        return Finding::pass(P, 1).with_detail("leader of view 1 is faulty, delivery bound not asserted");
    }
    let items: Vec<(usize, Value, Time)> = inp
        .events()
        .filter_map(|(i, e)| match &e.kind {
            EventKind::BroadcastCall { value } if inp.is_correct(e.pid) && e.t >= m.gst && value.valid() => {
                let deadline = e.t.max(entry) + 4 * m.delta;
                (deadline <= m.horizon).then(|| (i, value.clone(), deadline))
            }
            _ => None,
        })
        .collect();
    deliveries_by(inp, P, &items)
}

/// Rotation after an asynchronous start:
/// `tl(𝒱) <= GST+ρ+4Δ+B·max{4Δ,T+3Δ}+3δ`.
pub fn rotation_recovery_bound(inp: &Input<'_>) -> Finding {
    const P: &str = "rotation-recovery-bound";
    let (cfg, m) = (inp.cfg, inp.m);
    if !cfg.latency_mode {
        return Finding::na(P, "latency mode is off");
    }
    if !all_start_before_gst(inp) {
        return Finding::na(P, "some correct process does not start before GST");
    }
    let (delta, cap, t) = (m.delta, cfg.delta_cap, cfg.t_broadcast);
    if let Err(why) = timeouts_at_gst(inp, 4 * delta, (4 * delta).max(t + 3 * delta)) {
        return Finding::na(P, why);
    }
    let good = m.first_good_view();
    let bound = m.gst + m.rho + 4 * cap + cfg.batch * (4 * cap).max(t + 3 * cap) + 3 * delta;
    if bound > m.horizon {
        return Finding::na(P, format!("bound {bound} beyond horizon"));
    }
    match all_entered_by(inp, P, good, bound) {
        Ok(tl) => Finding::pass(P, 1).with_detail(format!("first good view {good}")).with_bound(format!("tl({good})"), tl, bound),
        Err(f) => f,
    }
}

/// A crashed leader after views that did not time out costs at most one recovery
/// timeout: `tl(v+1) <= tl(v)+R+δ`.
pub fn crashed_leader(inp: &Input<'_>) -> Finding {
    const P: &str = "crashed-leader";
    let (cfg, m) = (inp.cfg, inp.m);
    if !all_start_after_gst(inp) {
        return Finding::na(P, "some correct process starts before GST");
    }
    let delta = m.delta;
    if cfg.init_dur_recovery <= 4 * delta || cfg.init_dur_delivery <= (4 * delta).max(cfg.t_broadcast + 3 * delta) {
        return Finding::na(P, "initial timeouts too small");
    }
    let crashed = |p: Pid| matches!(cfg.behavior(p), Some(Behavior::Crash { at }) if at <= m.start_time(cfg, p));
    let Some(v) = (1..=m.max_view()).find(|&v| crashed(leader(v, cfg.n))) else {
        return Finding::na(P, "no entered view has an initially crashed leader");
    };
    // Earlier views must not have timed out anywhere, so timeouts are still initial.
    for w in 1..v {
        for p in m.correct_pids() {
            if matches!(m.advance[p].get(&w), Some((_, AdvanceCause::Timer))) {
                return Finding::na(P, format!("view {w} timed out at p{p}"));
            }
        }
    }
    if !m.all_entered(v) {
        return Finding::na(P, format!("not every correct process entered view {v}"));
    }
    let tl = m.tl[&v].0;
    let bound = tl + cfg.init_dur_recovery + delta;
    if bound > m.horizon {
        return Finding::na(P, format!("bound {bound} beyond horizon"));
    }
    match all_entered_by(inp, P, v + 1, bound) {
        Ok(tl1) => Finding::pass(P, 1)
            .with_detail(format!("crashed leader in view {v}"))
            .with_bound(format!("tl({})", v + 1), tl1, bound),
        Err(f) => f,
    }
}
