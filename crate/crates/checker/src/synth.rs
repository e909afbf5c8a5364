//! Hand-built traces for exercising the checker.

use wishsync_core::config::Protocol;
use wishsync_core::msg::{KeyRing, Msg, SignedMsg, Value};
use wishsync_core::trace::{AdvanceCause, Dest};
use wishsync_core::{EventKind, Pid, Pos, ScenarioConfig, Time, Trace, TraceEvent, View};

pub struct TraceBuilder {
    pub trace: Trace,
    keys: KeyRing,
    next_id: u64,
}

impl TraceBuilder {
    /// n = 4, f = 1, δ = 10, Δ = 12, ρ = 15, no faulty processes.
    pub fn new(protocol: Protocol, gst: Time, horizon: Time) -> Self {
        let mut cfg = ScenarioConfig::baseline(protocol, 1, 0);
        cfg.gst = gst;
        cfg.horizon = horizon;
        Self::with_config(cfg)
    }

    pub fn with_config(cfg: ScenarioConfig) -> Self {
        let keys = KeyRing::new(cfg.n, cfg.seed);
        TraceBuilder { trace: Trace::new(cfg), keys, next_id: 0 }
    }

    pub fn cfg(&mut self) -> &mut ScenarioConfig {
        &mut self.trace.header.config
    }

    pub fn push(&mut self, t: Time, pid: Pid, kind: EventKind) -> &mut Self {
        self.trace.events.push(TraceEvent { t, pid, kind });
        self
    }

    pub fn start(&mut self, t: Time, pid: Pid) -> &mut Self {
        self.push(t, pid, EventKind::Start)
    }

    pub fn advance(&mut self, t: Time, pid: Pid, v: View) -> &mut Self {
        let cause = if v == 0 { AdvanceCause::Start } else { AdvanceCause::Timer };
        self.push(t, pid, EventKind::AdvanceCall { v, cause })
    }

    pub fn advance_by(&mut self, t: Time, pid: Pid, v: View, cause: AdvanceCause) -> &mut Self {
        self.push(t, pid, EventKind::AdvanceCall { v, cause })
    }

    pub fn enter(&mut self, t: Time, pid: Pid, v: View) -> &mut Self {
        self.push(t, pid, EventKind::EnterView { v })
    }

    /// Start and advance from view 0, then enter view 1 at `t1`, for all of `pids`.
    pub fn boot(&mut self, t0: Time, t1: Time, pids: &[Pid]) -> &mut Self {
        for &p in pids {
            self.start(t0, p).advance(t0, p, 0);
        }
        for &p in pids {
            self.enter(t1, p, 1);
        }
        self
    }

    pub fn sign(&self, pid: Pid, body: Msg) -> SignedMsg {
        self.keys.signer(pid).sign(body)
    }

    /// Records a send and returns its id.
    pub fn send(&mut self, t: Time, pid: Pid, dest: Dest, body: Msg) -> u64 {
        let msg = self.sign(pid, body);
        self.send_signed(t, pid, dest, msg)
    }

    pub fn send_signed(&mut self, t: Time, pid: Pid, dest: Dest, msg: SignedMsg) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.push(t, pid, EventKind::Send { id, dest, msg });
        id
    }

    pub fn receive(&mut self, t: Time, pid: Pid, id: u64, from: Pid, sent_at: Time) -> &mut Self {
        self.push(t, pid, EventKind::Receive { id, from, sent_at })
    }

    pub fn broadcast(&mut self, t: Time, pid: Pid, x: &Value) -> &mut Self {
        self.push(t, pid, EventKind::BroadcastCall { value: x.clone() })
    }

    pub fn deliver(&mut self, t: Time, pid: Pid, k: Pos, x: &Value) -> &mut Self {
        self.push(t, pid, EventKind::Deliver { position: k, value: x.clone() })
    }

    pub fn build(&self) -> Trace {
        self.trace.clone()
    }
}
