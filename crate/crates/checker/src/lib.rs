//! Offline property checker for simulation traces.
//!
//! [`check`] folds over a trace and reports a verdict for every property
//! that applies to the protocol in the trace header.

pub mod abcast;
pub mod cases;
pub mod csync;
pub mod infra;
pub mod latency;
pub mod metrics;
pub mod report;
pub mod sync;
pub mod synth;

use std::collections::HashMap;

use wishsync_core::config::Protocol;
use wishsync_core::msg::SignedMsg;
use wishsync_core::{EventKind, Pid, ScenarioConfig, Trace, TraceEvent};

pub use metrics::Metrics;
pub use report::{Bound, Finding, Report, Verdict, Witness};

/// Everything a property needs: the trace, its config, metrics and an index
/// of sends by message id.
pub struct Input<'a> {
    pub trace: &'a Trace,
    pub cfg: &'a ScenarioConfig,
    pub m: &'a Metrics,
    sends: HashMap<u64, usize>,
}

impl<'a> Input<'a> {
    pub fn new(trace: &'a Trace, m: &'a Metrics) -> Self {
        Input { trace, cfg: trace.config(), m, sends: infra::send_index(&trace.events) }
    }

    pub fn events(&self) -> impl Iterator<Item = (usize, &'a TraceEvent)> {
        self.trace.events.iter().enumerate()
    }

    pub fn is_correct(&self, p: Pid) -> bool {
        p < self.m.n && self.m.correct[p]
    }

    pub fn witness(&self, index: usize) -> Witness {
        Witness { index, event: self.trace.events[index].clone() }
    }

    /// The message carried by send `id`.
    pub fn sent_msg(&self, id: u64) -> Option<&'a SignedMsg> {
        let i = *self.sends.get(&id)?;
        match &self.trace.events[i].kind {
            EventKind::Send { msg, .. } => Some(msg),
            _ => None,
        }
    }
}

/// Property ids checked for a protocol, in report order.
pub fn properties(protocol: Protocol) -> Vec<&'static str> {
    let mut out = vec![
        "event-order",
        "post-gst-delay",
        "unforgeability",
        "bounded-space",
        "monotonicity",
        "validity",
        "no-skip",
        "wish-monotonicity",
        "wish-form",
        "bounded-entry",
        "startup",
        "progress",
        "late-entry-bound",
        "advance-to-entry-bound",
    ];
    match protocol {
        Protocol::ToyClient => out.push("target-view"),
        Protocol::ConsensusSync => {
            out.extend(["cs-local-order", "cs-after-gst", "cs-all-enter", "cs-bounded-entry", "cs-duration-gap"])
        }
        Protocol::PbftLight | Protocol::PbftRotation | Protocol::HotstuffLight => {
            out.extend([
                "integrity",
                "external-validity",
                "ordering",
                "liveness",
                "prepared-uniqueness",
                "committed-prepared",
                "commit-agreement",
                "committed-uniqueness",
                "position-discipline",
            ]);
            match protocol {
                Protocol::PbftLight => out.extend(["recovery-bound", "good-case"]),
                Protocol::PbftRotation => out.extend(["rotation-recovery-bound", "crashed-leader"]),
                _ => {}
            }
        }
    }
    out
}

pub fn check(trace: &Trace) -> Report {
    let m = Metrics::compute(trace);
    let inp = Input::new(trace, &m);
    let mut findings = infra::check(&inp);
    findings.extend(sync::check(&inp));
    let protocol = inp.cfg.protocol;
    if protocol == Protocol::ToyClient {
        findings.push(sync::target_view(&inp));
    }
    if protocol == Protocol::ConsensusSync {
        findings.extend(csync::check(&inp));
    }
    if protocol.is_smr() {
        findings.extend(abcast::check(&inp));
        findings.extend(latency::check(&inp));
    }
    Report { scenario: inp.cfg.name.clone(), findings }
}

/// Like [`check`], keeping only the listed properties.
pub fn check_only(trace: &Trace, props: &[&str]) -> Report {
    let mut r = check(trace);
    r.findings.retain(|f| props.contains(&f.property.as_str()));
    r
}
