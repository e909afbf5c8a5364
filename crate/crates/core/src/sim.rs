//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(due, seq)`; `seq` follows creation order, so a run
//! is a pure function of its configuration.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::ByzantineNode;
use crate::clock::LocalClock;
use crate::config::{ConfigError, DelayMode, FaultDirective, Protocol, ScenarioConfig};
use crate::csync::ConsensusSync;
use crate::msg::{KeyRing, SignedMsg, Signer, Value};
use crate::node::{Action, Ctx, Input, MemUsage, Node, ProtocolParams, SyncNode};
use crate::toy::ToyClient;
use crate::trace::{Dest, EventKind, TimerId, Trace, TraceEvent};
use crate::{hotstuff, pbft, rotation, Pid, Time};

#[derive(Debug)]
enum EvKind {
    Deliver { to: Pid, from: Pid, id: u64, sent_at: Time, msg: SignedMsg },
    Timer { pid: Pid, id: TimerId, gen: u64 },
    Periodic { pid: Pid, k: u64 },
    Start { pid: Pid },
    Client { pid: Pid, value: Value },
}

#[derive(Debug)]
struct Event {
    due: Time,
    seq: u64,
    kind: EvKind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        (self.due, self.seq) == (o.due, o.seq)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.due, self.seq).cmp(&(o.due, o.seq))
    }
}

/// Correct node for `pid`, wrapped in its Byzantine behaviour if faulty.
pub fn build_node(cfg: &ScenarioConfig, pid: Pid, keys: &Arc<KeyRing>) -> Box<dyn Node> {
    let (n, f) = (cfg.n, cfg.f);
    let p = ProtocolParams::from_config(cfg);
    let k = keys.clone();
    let node: Box<dyn Node> = match cfg.protocol {
        Protocol::ToyClient => Box::new(SyncNode::new(n, f, k, ToyClient::new(cfg.tau))),
        Protocol::ConsensusSync => Box::new(SyncNode::new(n, f, k, ConsensusSync::new(p.view_duration))),
        Protocol::PbftLight => Box::new(SyncNode::new(n, f, k, pbft::replica(pid, p, keys.clone()))),
        Protocol::PbftRotation => Box::new(SyncNode::new(n, f, k, rotation::replica(pid, p, keys.clone()))),
        Protocol::HotstuffLight => Box::new(SyncNode::new(n, f, k, hotstuff::replica(pid, p, keys.clone()))),
    };
    match cfg.behavior(pid) {
        Some(b) => Box::new(ByzantineNode::new(pid, n, cfg.seed ^ ADVERSARY_SALT, b, node)),
        None => node,
    }
}

const ADVERSARY_SALT: u64 = 0x5eed_0fad_0000_0001;

pub struct Sim<'s> {
    cfg: ScenarioConfig,
    nodes: Vec<Box<dyn Node>>,
    signers: Vec<Signer>,
    clocks: Vec<LocalClock>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: Time,
    timers: Vec<BTreeMap<TimerId, u64>>,
    timer_gen: u64,
    net: ChaCha8Rng,
    next_msg: u64,
    mem_hw: Vec<MemUsage>,
    sink: &'s mut dyn FnMut(TraceEvent),
}

impl<'s> Sim<'s> {
    pub fn new(cfg: ScenarioConfig, sink: &'s mut dyn FnMut(TraceEvent)) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let keys = Arc::new(KeyRing::new(cfg.n, cfg.seed));
        let nodes = (0..cfg.n).map(|p| build_node(&cfg, p, &keys)).collect();
        let signers = (0..cfg.n).map(|p| keys.signer(p)).collect();
        let clocks = (0..cfg.n).map(|p| LocalClock::new(cfg.rate(p), cfg.gst)).collect();
        let mut sim = Sim {
            nodes,
            signers,
            clocks,
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0,
            timers: vec![BTreeMap::new(); cfg.n],
            timer_gen: 0,
            net: ChaCha8Rng::seed_from_u64(cfg.seed),
            next_msg: 0,
            mem_hw: vec![MemUsage::default(); cfg.n],
            sink,
            cfg,
        };
        for pid in 0..sim.cfg.n {
            sim.push(sim.cfg.start_time(pid), EvKind::Start { pid });
            let first = sim.clocks[pid].real_at(sim.cfg.rho);
            sim.push(first, EvKind::Periodic { pid, k: 1 });
        }
        for op in sim.cfg.broadcasts.clone() {
            let payload = op.payload.unwrap_or_else(|| format!("v{}", op.id));
            sim.push(op.t, EvKind::Client { pid: op.pid, value: Value::op(op.id, payload) });
        }
        Ok(sim)
    }

    fn push(&mut self, due: Time, kind: EvKind) {
        self.seq += 1;
        self.heap.push(Reverse(Event { due, seq: self.seq, kind }));
    }

    fn emit(&mut self, pid: Pid, kind: EventKind) {
        (self.sink)(TraceEvent { t: self.now, pid, kind });
    }

    pub fn run(mut self) {
        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.due > self.cfg.horizon {
                break;
            }
            self.now = ev.due;
            match ev.kind {
                EvKind::Deliver { to, from, id, sent_at, msg } => {
                    self.emit(to, EventKind::Receive { id, from, sent_at });
                    self.step(to, Input::Message { from, msg });
                }
                EvKind::Timer { pid, id, gen } => {
                    if self.timers[pid].get(&id) == Some(&gen) {
                        self.timers[pid].remove(&id);
                        self.emit(pid, EventKind::TimerExpire { timer: id.clone() });
                        self.step(pid, Input::Timer(id));
                    }
                }
                EvKind::Periodic { pid, k } => {
                    self.step(pid, Input::Periodic);
                    let next = self.clocks[pid].real_at((k + 1) * self.cfg.rho).max(self.now + 1);
                    self.push(next, EvKind::Periodic { pid, k: k + 1 });
                }
                EvKind::Start { pid } => {
                    self.emit(pid, EventKind::Start);
                    self.step(pid, Input::Start);
                }
                EvKind::Client { pid, value } => self.step(pid, Input::ClientBroadcast(value)),
            }
        }
    }

    fn step(&mut self, pid: Pid, input: Input) {
        let local = self.clocks[pid].local(self.now);
        let mut cx = Ctx::new(pid, local, self.now, &self.signers[pid]);
        self.nodes[pid].handle(&mut cx, input);
        for a in cx.take_actions() {
            self.apply(pid, a);
        }
        let m = self.nodes[pid].mem();
        let hw = &mut self.mem_hw[pid];
        if m.sync_entries > hw.sync_entries || m.future_slots > hw.future_slots || m.future_msgs > hw.future_msgs {
            hw.sync_entries = hw.sync_entries.max(m.sync_entries);
            hw.future_slots = hw.future_slots.max(m.future_slots);
            hw.future_msgs = hw.future_msgs.max(m.future_msgs);
            self.emit(
                pid,
                EventKind::MemSample {
                    sync_entries: m.sync_entries,
                    future_slots: m.future_slots,
                    future_msgs: m.future_msgs,
                },
            );
        }
    }

    fn apply(&mut self, pid: Pid, a: Action) {
        match a {
            Action::Send { dest, msg } => self.send(pid, dest, msg),
            Action::StartTimer { id, dur } => {
                self.timer_gen += 1;
                let gen = self.timer_gen;
                self.timers[pid].insert(id.clone(), gen);
                let due = self.clocks[pid].fire_time(self.now, dur.max(1));
                self.emit(pid, EventKind::TimerStart { timer: id.clone(), duration: dur });
                self.push(due, EvKind::Timer { pid, id, gen });
            }
            Action::StopTimer(id) => {
                if self.timers[pid].remove(&id).is_some() {
                    self.emit(pid, EventKind::TimerStop { timer: id });
                }
            }
            Action::StopAllTimers => {
                for id in std::mem::take(&mut self.timers[pid]).into_keys() {
                    self.emit(pid, EventKind::TimerStop { timer: id });
                }
            }
            Action::Trace(kind) => self.emit(pid, kind),
        }
    }

    fn send(&mut self, from: Pid, dest: Dest, msg: SignedMsg) {
        let id = self.next_msg;
        self.next_msg += 1;
        self.emit(from, EventKind::Send { id, dest, msg: msg.clone() });
        let targets: Vec<Pid> = match dest {
            Dest::All => (0..self.cfg.n).collect(),
            Dest::To(p) if p < self.cfg.n => vec![p],
            Dest::To(_) => Vec::new(),
        };
        for to in targets {
            if let Some(due) = self.delivery_time(from, to) {
                let msg = msg.clone();
                self.push(due, EvKind::Deliver { to, from, id, sent_at: self.now, msg });
            }
        }
    }

    /// Arrival time of a message sent now, or `None` if it is lost.
    fn delivery_time(&mut self, from: Pid, to: Pid) -> Option<Time> {
        let now = self.now;
        let delta = self.cfg.delta;
        if from == to {
            return Some(now);
        }
        if now >= self.cfg.gst {
            let d = match self.cfg.network.post_gst {
                DelayMode::Uniform => self.net.gen_range(1..=delta),
                DelayMode::Max => delta,
                DelayMode::Min => 1,
            };
            return Some(now + d);
        }
        let mut max_delay = delta;
        for d in &self.cfg.fault_plan {
            match d {
                FaultDirective::Partition { groups, until } if now < (*until).min(self.cfg.gst) => {
                    let g = |p: Pid| groups.iter().position(|g| g.contains(&p));
                    if let (Some(a), Some(b)) = (g(from), g(to)) {
                        if a != b {
                            return None;
                        }
                    }
                }
                FaultDirective::Drop { permille, from: fs, to: ts } => {
                    let hit = fs.as_ref().is_none_or(|s| s.contains(&from)) && ts.as_ref().is_none_or(|s| s.contains(&to));
                    if hit && self.net.gen_range(0..1000) < *permille {
                        return None;
                    }
                }
                FaultDirective::Delay { max } => max_delay = max_delay.max(*max),
                _ => {}
            }
        }
        Some(now + self.net.gen_range(1..=max_delay))
    }
}

/// Runs a scenario, streaming events to `sink`.
pub fn run_with_sink(cfg: ScenarioConfig, sink: &mut dyn FnMut(TraceEvent)) -> Result<(), ConfigError> {
    Sim::new(cfg, sink)?.run();
    Ok(())
}

/// Runs a scenario up to its horizon and returns the full trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace, ConfigError> {
    let mut events = Vec::new();
    run_with_sink(cfg.clone(), &mut |e| events.push(e))?;
    let mut t = Trace::new(cfg.clone());
    t.events = events;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: Protocol) -> ScenarioConfig {
        let mut c = ScenarioConfig::baseline(p, 1, 42);
        c.horizon = 400;
        c
    }

    #[test]
    fn deterministic() {
        let mut c = cfg(Protocol::PbftLight);
        c.gst = 100;
        c.fault_plan.push(FaultDirective::Drop { permille: 300, from: None, to: None });
        let a = run_scenario(&c).unwrap().to_jsonl();
        let b = run_scenario(&c).unwrap().to_jsonl();
        assert_eq!(a, b);
    }

    #[test]
    fn post_gst_delay_bounded() {
        let mut c = cfg(Protocol::ToyClient);
        c.gst = 50;
        let t = run_scenario(&c).unwrap();
        for e in &t.events {
            if let EventKind::Receive { sent_at, .. } = e.kind {
                if sent_at >= c.gst {
                    assert!(e.t <= sent_at + c.delta);
                }
            }
        }
        assert!(t.events.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn self_delivery_is_instant() {
        let t = run_scenario(&cfg(Protocol::ToyClient)).unwrap();
        let sends: BTreeMap<u64, (Time, Pid)> = t
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Send { id, .. } => Some((id, (e.t, e.pid))),
                _ => None,
            })
            .collect();
        let mut seen = 0;
        for e in &t.events {
            if let EventKind::Receive { id, from, .. } = e.kind {
                if from == e.pid {
                    assert_eq!(sends[&id].0, e.t);
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn nobody_advances_without_start() {
        let mut c = cfg(Protocol::ToyClient);
        c.start_times = vec![1000; 4];
        c.horizon = 500;
        let t = run_scenario(&c).unwrap();
        assert!(!t.events.iter().any(|e| matches!(e.kind, EventKind::EnterView { .. })));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = cfg(Protocol::ToyClient);
        c.n = 5;
        assert!(run_scenario(&c).is_err());
    }
}
