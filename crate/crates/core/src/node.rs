//! Process interface between the engine and protocol code.

use std::sync::Arc;

use crate::config::ScenarioConfig;
use crate::msg::{KeyRing, Msg, SignedMsg, Signer, Value};
use crate::sync::SyncState;
use crate::trace::{AdvanceCause, Dest, EventKind, TimerId};
use crate::{Pid, Time, View};

/// What a replica is allowed to know about the system. GST and the actual
/// message delay are deliberately absent.
#[derive(Clone, Debug)]
pub struct ProtocolParams {
    pub n: usize,
    pub f: usize,
    pub delta_cap: Time,
    pub rho: Time,
    pub tau: Time,
    pub t_broadcast: Time,
    pub batch: u64,
    pub init_dur_delivery: Time,
    pub init_dur_recovery: Time,
    pub latency_mode: bool,
    /// `(recovery, delivery)` caps applied in latency mode.
    pub caps: (Time, Time),
    pub view_duration: Time,
}

impl ProtocolParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ProtocolParams {
            n: cfg.n,
            f: cfg.f,
            delta_cap: cfg.delta_cap,
            rho: cfg.rho,
            tau: cfg.tau,
            t_broadcast: cfg.t_broadcast,
            batch: cfg.batch,
            init_dur_delivery: cfg.init_dur_delivery,
            init_dur_recovery: cfg.init_dur_recovery,
            latency_mode: cfg.latency_mode,
            caps: cfg.duration_caps(),
            view_duration: cfg.view_duration.unwrap_or(cfg.delta_cap),
        }
    }

    pub fn quorum(&self) -> usize {
        2 * self.f + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Send { dest: Dest, msg: SignedMsg },
    StartTimer { id: TimerId, dur: Time },
    StopTimer(TimerId),
    StopAllTimers,
    Trace(EventKind),
}

#[derive(Clone, Debug)]
pub enum Input {
    Start,
    Message { from: Pid, msg: SignedMsg },
    Timer(TimerId),
    Periodic,
    ClientBroadcast(Value),
}

/// Handler context: collects the actions of one handler invocation.
pub struct Ctx<'a> {
    pid: Pid,
    now: Time,
    real: Time,
    signer: &'a Signer,
    actions: Vec<Action>,
    advance: Option<AdvanceCause>,
}

impl<'a> Ctx<'a> {
    pub fn new(pid: Pid, now: Time, real: Time, signer: &'a Signer) -> Self {
        Ctx { pid, now, real, signer, actions: Vec::new(), advance: None }
    }

    pub fn pid(&self) -> Pid {
        self.pid
    }

    /// Local clock reading.
    pub fn now(&self) -> Time {
        self.now
    }

    /// Real time; only the adversary may look at it.
    pub(crate) fn real(&self) -> Time {
        self.real
    }

    pub fn sign(&self, body: Msg) -> SignedMsg {
        self.signer.sign(body)
    }

    pub fn send(&mut self, dest: Dest, body: Msg) {
        let msg = self.signer.sign(body);
        self.actions.push(Action::Send { dest, msg });
    }

    pub fn send_signed(&mut self, dest: Dest, msg: SignedMsg) {
        self.actions.push(Action::Send { dest, msg });
    }

    pub fn start_timer(&mut self, id: TimerId, dur: Time) {
        self.actions.push(Action::StartTimer { id, dur });
    }

    pub fn stop_timer(&mut self, id: TimerId) {
        self.actions.push(Action::StopTimer(id));
    }

    pub fn stop_all_timers(&mut self) {
        self.actions.push(Action::StopAllTimers);
    }

    pub fn trace(&mut self, kind: EventKind) {
        self.actions.push(Action::Trace(kind));
    }

    /// Ask the synchronizer to advance once the current handler returns.
    pub fn request_advance(&mut self, cause: AdvanceCause) {
        self.advance.get_or_insert(cause);
    }

    pub fn take_advance(&mut self) -> Option<AdvanceCause> {
        self.advance.take()
    }

    pub fn take_actions(&mut self) -> Vec<Action> {
        std::mem::take(&mut self.actions)
    }

    pub fn push(&mut self, a: Action) {
        self.actions.push(a);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemUsage {
    pub sync_entries: usize,
    pub future_slots: usize,
    pub future_msgs: usize,
}

pub trait Node: Send {
    fn handle(&mut self, cx: &mut Ctx<'_>, input: Input);
    fn mem(&self) -> MemUsage;
}

/// Protocol running on top of the synchronizer.
pub trait Upper: Send {
    fn on_start(&mut self, cx: &mut Ctx<'_>);
    fn on_new_view(&mut self, v: View, cx: &mut Ctx<'_>);
    fn on_message(&mut self, from: Pid, msg: &SignedMsg, cx: &mut Ctx<'_>);
    fn on_timer(&mut self, id: TimerId, cx: &mut Ctx<'_>);
    fn on_periodic(&mut self, _cx: &mut Ctx<'_>) {}
    fn on_client_broadcast(&mut self, _x: Value, _cx: &mut Ctx<'_>) {}
    /// `(slots, messages)` held for future views.
    fn future_usage(&self) -> (usize, usize) {
        (0, 0)
    }
}

/// A correct process: the synchronizer plus a protocol layered on it.
pub struct SyncNode<U> {
    sync: SyncState,
    keys: Arc<KeyRing>,
    pub upper: U,
}

impl<U: Upper> SyncNode<U> {
    pub fn new(n: usize, f: usize, keys: Arc<KeyRing>, upper: U) -> Self {
        SyncNode { sync: SyncState::new(n, f), keys, upper }
    }

    pub fn sync(&self) -> &SyncState {
        &self.sync
    }

    fn flush_advance(&mut self, cx: &mut Ctx<'_>) {
        if let Some(cause) = cx.take_advance() {
            cx.trace(EventKind::AdvanceCall { v: self.sync.last_entered(), cause });
            let w = self.sync.advance();
            cx.send(Dest::All, Msg::Wish { v: w });
        }
    }
}

impl<U: Upper> Node for SyncNode<U> {
    fn handle(&mut self, cx: &mut Ctx<'_>, input: Input) {
        match input {
            Input::Start => self.upper.on_start(cx),
            Input::Message { from, msg } => {
                if !self.keys.verify(&msg) {
                    return;
                }
                if let Msg::Wish { v } = msg.body {
                    if v == 0 {
                        return;
                    }
                    // The notification is handled after the synchronizer's
                    // own step completes, echo included.
                    let out = self.sync.handle_wish(msg.signer, v);
                    if let Some(nv) = out.new_view {
                        cx.trace(EventKind::EnterView { v: nv });
                    }
                    if let Some(e) = out.echo {
                        cx.send(Dest::All, Msg::Wish { v: e });
                    }
                    if let Some(nv) = out.new_view {
                        self.upper.on_new_view(nv, cx);
                    }
                } else {
                    self.upper.on_message(from, &msg, cx);
                }
            }
            Input::Timer(id) => self.upper.on_timer(id, cx),
            Input::Periodic => {
                if let Some(w) = self.sync.periodic() {
                    cx.send(Dest::All, Msg::Wish { v: w });
                }
                self.upper.on_periodic(cx);
            }
            Input::ClientBroadcast(x) => {
                cx.trace(EventKind::BroadcastCall { value: x.clone() });
                self.upper.on_client_broadcast(x, cx);
            }
        }
        self.flush_advance(cx);
    }

    fn mem(&self) -> MemUsage {
        let (future_slots, future_msgs) = self.upper.future_usage();
        MemUsage { sync_entries: self.sync.entries(), future_slots, future_msgs }
    }
}
