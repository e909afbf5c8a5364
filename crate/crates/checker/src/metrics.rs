//! Per-view timing statistics over correct processes.
//!
//! Times are paired with the event index so that "strictly before" can be
//! decided for events sharing a tick.

use std::collections::BTreeMap;

use wishsync_core::trace::AdvanceCause;
use wishsync_core::{EventKind, Pid, ScenarioConfig, Time, Trace, View};

/// `(tick, event index)`.
pub type Stamp = (Time, usize);

#[derive(Clone, Debug)]
pub struct Metrics {
    pub n: usize,
    pub gst: Time,
    pub delta: Time,
    pub rho: Time,
    pub horizon: Time,
    pub correct: Vec<bool>,
    /// First entry of each view, per process.
    pub enter: Vec<BTreeMap<View, Stamp>>,
    /// First `advance` call from each view, per process, with its cause.
    pub advance: Vec<BTreeMap<View, (Stamp, AdvanceCause)>>,
    /// Time of the `start()` call, per process.
    pub start: Vec<Option<Stamp>>,
    /// Earliest correct entry of each view.
    pub tm: BTreeMap<View, Stamp>,
    /// Latest correct entry of each view, over processes that entered it.
    pub tl: BTreeMap<View, Stamp>,
    /// Earliest correct `advance` from each view.
    pub tam: BTreeMap<View, Stamp>,
}

impl Metrics {
    pub fn compute(trace: &Trace) -> Metrics {
        let cfg = trace.config();
        let n = cfg.n;
        let correct: Vec<bool> = (0..n).map(|p| !cfg.is_faulty(p)).collect();
        let mut m = Metrics {
            n,
            gst: cfg.gst,
            delta: cfg.delta,
            rho: cfg.rho,
            horizon: cfg.horizon,
            correct,
            enter: vec![BTreeMap::new(); n],
            advance: vec![BTreeMap::new(); n],
            start: vec![None; n],
            tm: BTreeMap::new(),
            tl: BTreeMap::new(),
            tam: BTreeMap::new(),
        };
        for (i, e) in trace.events.iter().enumerate() {
            if e.pid >= n {
                continue;
            }
            let s = (e.t, i);
            match &e.kind {
                EventKind::EnterView { v } => {
                    m.enter[e.pid].entry(*v).or_insert(s);
                }
                EventKind::AdvanceCall { v, cause } => {
                    m.advance[e.pid].entry(*v).or_insert((s, *cause));
                }
                EventKind::Start => {
                    m.start[e.pid].get_or_insert(s);
                }
                _ => {}
            }
        }
        for p in (0..n).filter(|&p| m.correct[p]) {
            for (&v, &s) in &m.enter[p] {
                let lo = m.tm.entry(v).or_insert(s);
                *lo = (*lo).min(s);
                let hi = m.tl.entry(v).or_insert(s);
                *hi = (*hi).max(s);
            }
            for (&v, &(s, _)) in &m.advance[p] {
                let lo = m.tam.entry(v).or_insert(s);
                *lo = (*lo).min(s);
            }
        }
        m
    }

    pub fn correct_pids(&self) -> impl Iterator<Item = Pid> + '_ {
        (0..self.n).filter(|&p| self.correct[p])
    }

    pub fn num_correct(&self) -> usize {
        self.correct.iter().filter(|&&c| c).count()
    }

    /// `tae_i(v)`: first time `p` attempts to advance from `v` or enters a
    /// view above `v`.
    pub fn tae(&self, p: Pid, v: View) -> Option<Stamp> {
        let adv = self.advance[p].get(&v).map(|(s, _)| *s);
        let higher = self.enter[p].range(v + 1..).map(|(_, s)| *s).min();
        match (adv, higher) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Latest `tae` over correct processes; `None` unless all have one.
    pub fn taelast(&self, v: View) -> Option<Stamp> {
        self.correct_pids().map(|p| self.tae(p, v)).collect::<Option<Vec<_>>>()?.into_iter().max()
    }

    /// Whether the first correct `advance` happened before GST.
    pub fn early_start(&self) -> bool {
        self.tam.get(&0).is_some_and(|s| s.0 < self.gst)
    }

    /// Earliest time after which every correct process has retransmitted its
    /// highest WISH at least once after GST.
    pub fn gst_bar(&self) -> Option<Time> {
        if self.early_start() {
            Some(self.gst + self.rho)
        } else {
            self.tam.get(&0).map(|s| s.0)
        }
    }

    /// First view from which entry is guaranteed to be bounded.
    pub fn first_good_view(&self) -> View {
        if !self.early_start() {
            return 1;
        }
        let limit = self.gst + self.rho;
        self.tm.iter().filter(|(_, s)| s.0 < limit).map(|(v, _)| *v).max().unwrap_or(0) + 1
    }

    /// Whether every correct process entered `v`.
    pub fn all_entered(&self, v: View) -> bool {
        self.correct_pids().all(|p| self.enter[p].contains_key(&v))
    }

    /// Highest view entered by any correct process.
    pub fn max_view(&self) -> View {
        self.tm.keys().next_back().copied().unwrap_or(0)
    }

    pub fn start_time(&self, cfg: &ScenarioConfig, p: Pid) -> Time {
        self.start[p].map_or(cfg.start_time(p), |s| s.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wishsync_core::config::Protocol;
    use wishsync_core::TraceEvent;

    fn ev(t: Time, pid: Pid, kind: EventKind) -> TraceEvent {
        TraceEvent { t, pid, kind }
    }

    fn trace(gst: Time, events: Vec<TraceEvent>) -> Trace {
        let mut c = ScenarioConfig::baseline(Protocol::ToyClient, 1, 0);
        c.gst = gst;
        c.rho = 15;
        let mut t = Trace::new(c);
        t.events = events;
        t
    }

    fn adv(t: Time, pid: Pid, v: View) -> TraceEvent {
        ev(t, pid, EventKind::AdvanceCall { v, cause: AdvanceCause::Start })
    }

    #[test]
    fn first_good_view_before_gst() {
        // tm(3) = GST + rho - 1 and nothing later before GST + rho.
        let t = trace(
            100,
            vec![
                adv(5, 0, 0),
                ev(10, 0, EventKind::EnterView { v: 1 }),
                ev(50, 0, EventKind::EnterView { v: 2 }),
                ev(114, 1, EventKind::EnterView { v: 3 }),
                ev(115, 1, EventKind::EnterView { v: 4 }),
            ],
        );
        let m = Metrics::compute(&t);
        assert_eq!(m.first_good_view(), 4);
        assert_eq!(m.gst_bar(), Some(115));
    }

    #[test]
    fn first_good_view_after_gst() {
        let t = trace(100, vec![adv(100, 0, 0), ev(105, 0, EventKind::EnterView { v: 1 })]);
        let m = Metrics::compute(&t);
        assert_eq!(m.first_good_view(), 1);
        assert_eq!(m.gst_bar(), Some(100));
    }

    #[test]
    fn tae_takes_earlier_of_advance_and_higher_entry() {
        let t = trace(
            0,
            vec![
                ev(10, 0, EventKind::EnterView { v: 1 }),
                ev(20, 0, EventKind::EnterView { v: 3 }),
                adv(30, 0, 1),
                adv(5, 1, 0),
            ],
        );
        let m = Metrics::compute(&t);
        assert_eq!(m.tae(0, 1).map(|s| s.0), Some(20));
        assert_eq!(m.tae(0, 0).map(|s| s.0), Some(10));
        assert_eq!(m.tae(1, 0).map(|s| s.0), Some(5));
        assert_eq!(m.taelast(0), None);
    }
}
