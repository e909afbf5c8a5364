use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use super::{leader, valid_new_leader, FutureBuffer, Phase, Status, Variant};
use crate::msg::{committed_some_view, Cert, Digest, KeyRing, Msg, PreparedEntry, SignedMsg, Value, VoteKind};
use crate::node::{Ctx, ProtocolParams, Upper};
use crate::trace::{AdvanceCause, Dest, EventKind, TimerId};
use crate::{Pid, Pos, Time, View};

/// DECISION retransmissions per destination per period.
const DECISION_RESEND_LIMIT: usize = 8;

#[derive(Clone, Debug)]
pub struct Prep {
    pub value: Value,
    pub view: View,
    pub cert: Cert,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ValueMsg {
    Broadcast,
    Forward,
}

/// Replica state shared by PBFT-light, PBFT-rotation and HotStuff-light.
/// Protocol-specific handlers live in the respective modules.
pub struct Replica {
    pub(crate) pid: Pid,
    pub(crate) p: ProtocolParams,
    pub(crate) variant: Variant,
    pub(crate) keys: Arc<KeyRing>,

    pub(crate) curr_view: View,
    pub(crate) status: Status,
    pub(crate) log: BTreeMap<Pos, Value>,
    log_count: HashMap<Value, usize>,
    pub(crate) phase: HashMap<Pos, Phase>,
    pub(crate) prep: BTreeMap<Pos, Prep>,
    pub(crate) lock: BTreeMap<Pos, (View, Digest)>,
    pub(crate) commit_log: BTreeMap<Pos, Value>,
    pub(crate) last_delivered: Pos,
    pub(crate) delivered: HashSet<Value>,
    pub(crate) init_log_length: Pos,
    pub(crate) next: Pos,
    pub(crate) dur_delivery: Time,
    pub(crate) dur_recovery: Time,
    /// Values whose delivery timer is running (PBFT-light).
    pub(crate) active_delivery: HashSet<Value>,
    /// Pending values in arrival order (rotation protocols).
    pub(crate) queue: VecDeque<Value>,
    /// Own broadcasts not yet delivered.
    own: Vec<Value>,

    votes: HashMap<(VoteKind, Pos, Digest), Vec<SignedMsg>>,
    pub(crate) new_leaders: Vec<SignedMsg>,
    pub(crate) new_state_sent: bool,
    /// Values this process proposed as leader of the current view.
    pub(crate) proposed: HashSet<Value>,
    /// Current-view messages waiting for `status = normal`.
    pending_normal: Vec<SignedMsg>,
    pending_values: Vec<(ValueMsg, Value)>,
    future: FutureBuffer,

    dec_known: BTreeMap<Pos, (Value, Cert)>,
    dec_heard: HashMap<Pos, BTreeSet<Pid>>,
    dec_sent: HashMap<(Pos, Pid), Time>,
}

impl Replica {
    pub fn new(pid: Pid, variant: Variant, p: ProtocolParams, keys: Arc<KeyRing>) -> Self {
        Replica {
            pid,
            variant,
            keys,
            curr_view: 0,
            status: Status::Initializing,
            log: BTreeMap::new(),
            log_count: HashMap::new(),
            phase: HashMap::new(),
            prep: BTreeMap::new(),
            lock: BTreeMap::new(),
            commit_log: BTreeMap::new(),
            last_delivered: 0,
            delivered: HashSet::new(),
            init_log_length: 0,
            next: 1,
            dur_delivery: p.init_dur_delivery,
            dur_recovery: p.init_dur_recovery,
            active_delivery: HashSet::new(),
            queue: VecDeque::new(),
            own: Vec::new(),
            votes: HashMap::new(),
            new_leaders: Vec::new(),
            new_state_sent: false,
            proposed: HashSet::new(),
            pending_normal: Vec::new(),
            pending_values: Vec::new(),
            future: FutureBuffer::new(),
            dec_known: BTreeMap::new(),
            dec_heard: HashMap::new(),
            dec_sent: HashMap::new(),
            p,
        }
    }

    pub fn curr_view(&self) -> View {
        self.curr_view
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn last_delivered(&self) -> Pos {
        self.last_delivered
    }

    pub fn durations(&self) -> (Time, Time) {
        (self.dur_recovery, self.dur_delivery)
    }

    pub fn lock_view(&self, k: Pos) -> View {
        self.lock.get(&k).map_or(0, |(v, _)| *v)
    }

    pub fn prep_view(&self, k: Pos) -> View {
        self.prep.get(&k).map_or(0, |p| p.view)
    }

    pub fn future(&self) -> &FutureBuffer {
        &self.future
    }

    pub(crate) fn q(&self) -> usize {
        self.p.quorum()
    }

    pub(crate) fn is_leader(&self) -> bool {
        self.curr_view >= 1 && leader(self.curr_view, self.p.n) == self.pid
    }

    pub(crate) fn phase_of(&self, k: Pos) -> Phase {
        self.phase.get(&k).copied().unwrap_or_default()
    }

    /// `∃k. log[k] = x`; `nop` may repeat and never counts.
    pub(crate) fn in_log(&self, x: &Value) -> bool {
        !x.is_nop() && self.log_count.get(x).is_some_and(|&c| c > 0)
    }

    pub(crate) fn set_log(&mut self, k: Pos, x: Value) {
        if let Some(old) = self.log.insert(k, x.clone()) {
            if let Some(c) = self.log_count.get_mut(&old) {
                *c -= 1;
            }
        }
        *self.log_count.entry(x).or_insert(0) += 1;
    }

    pub(crate) fn replace_log(&mut self, log: BTreeMap<Pos, Value>) {
        self.log_count.clear();
        for x in log.values() {
            *self.log_count.entry(x.clone()).or_insert(0) += 1;
        }
        self.log = log;
    }

    fn bump(&self, dur: Time, cap: Time) -> Time {
        if !self.p.latency_mode {
            dur + self.p.tau
        } else if dur >= cap {
            dur
        } else {
            (dur + self.p.tau).min(cap)
        }
    }

    pub(crate) fn stop_all_timers(&mut self, cx: &mut Ctx<'_>) {
        cx.stop_all_timers();
        self.active_delivery.clear();
    }

    /// Common reaction to an expired delivery or recovery timer.
    pub(crate) fn expire(&mut self, cx: &mut Ctx<'_>) {
        self.stop_all_timers(cx);
        cx.request_advance(AdvanceCause::Timer);
        self.status = Status::Advanced;
        let (cap_r, cap_d) = self.p.caps;
        self.dur_delivery = self.bump(self.dur_delivery, cap_d);
        self.dur_recovery = self.bump(self.dur_recovery, cap_r);
    }

    /// Advance after a complete batch (rotation protocols).
    pub(crate) fn advance_batch(&mut self, cx: &mut Ctx<'_>) {
        self.stop_all_timers(cx);
        cx.request_advance(AdvanceCause::Batch);
        self.status = Status::Advanced;
    }

    pub(crate) fn deliver(&mut self, k: Pos, x: &Value, cx: &mut Ctx<'_>) {
        cx.trace(EventKind::Deliver { position: k, value: x.clone() });
        self.delivered.insert(x.clone());
        self.own.retain(|y| y != x);
        self.pending_values.retain(|(_, y)| y != x);
    }

    fn new_leader_report(&self) -> Vec<PreparedEntry> {
        self.prep
            .iter()
            .map(|(k, pr)| PreparedEntry {
                position: *k,
                prep_view: pr.view,
                value: pr.value.clone(),
                cert: pr.cert.clone(),
            })
            .collect()
    }

    fn enter_view(&mut self, v: View, cx: &mut Ctx<'_>) {
        self.stop_all_timers(cx);
        self.curr_view = v;
        self.status = Status::Initializing;
        self.phase.clear();
        self.votes.clear();
        self.new_leaders.clear();
        self.new_state_sent = false;
        self.proposed.clear();
        self.pending_normal.clear();
        if self.skips_view_change(v) {
            // Nothing can have been prepared before view 1: start with an
            // empty log and no recovery timer.
            self.replace_log(BTreeMap::new());
            self.init_log_length = 0;
            self.next = 1;
            self.status = Status::Normal;
        } else {
            let report = Msg::NewLeader { view: v, prepared: self.new_leader_report() };
            cx.send(Dest::To(leader(v, self.p.n)), report);
            cx.start_timer(TimerId::Recovery, self.dur_recovery);
        }
        for m in self.future.take_view(v) {
            self.on_current(m, cx);
        }
    }

    /// View 1 in latency mode needs no NEW_LEADER exchange (PBFT-light).
    pub(crate) fn skips_view_change(&self, v: View) -> bool {
        self.variant == Variant::Light && self.p.latency_mode && v == 1
    }

    fn on_value_msg(&mut self, kind: ValueMsg, x: Value, cx: &mut Ctx<'_>) {
        if !x.valid() || self.delivered.contains(&x) {
            return;
        }
        match (self.variant, kind) {
            (Variant::Light, _) => {
                if self.status != Status::Normal {
                    if !self.pending_values.iter().any(|(k, y)| *k == kind && *y == x) {
                        self.pending_values.push((kind, x));
                    }
                    return;
                }
                match kind {
                    ValueMsg::Broadcast => self.light_on_broadcast(x, cx),
                    ValueMsg::Forward => self.light_on_forward(x, cx),
                }
            }
            (_, ValueMsg::Broadcast) => self.rotation_on_broadcast(x),
            (_, ValueMsg::Forward) => {}
        }
    }

    fn on_current(&mut self, m: SignedMsg, cx: &mut Ctx<'_>) {
        match &m.body {
            Msg::Preprepare { view, position, value } => {
                let (v, k, x) = (*view, *position, value.clone());
                self.on_preprepare(&m, v, k, x, cx);
            }
            Msg::Prepare { .. } | Msg::Precommit { .. } | Msg::Commit { .. } => self.on_vote(&m, cx),
            Msg::NewLeader { .. } => self.on_new_leader(m, cx),
            Msg::NewState { .. } => self.on_new_state(&m, cx),
            _ => {}
        }
    }

    fn on_preprepare(&mut self, m: &SignedMsg, v: View, k: Pos, x: Value, cx: &mut Ctx<'_>) {
        if m.signer != leader(v, self.p.n) || k == 0 {
            return;
        }
        match self.status {
            Status::Normal => {}
            Status::Initializing => {
                self.pending_normal.push(m.clone());
                return;
            }
            Status::Advanced => return,
        }
        if self.phase_of(k) != Phase::Start || !x.valid() || self.in_log(&x) {
            return;
        }
        if self.variant != Variant::Light && k > v * self.p.batch {
            return;
        }
        let h = x.digest();
        self.set_log(k, x);
        self.phase.insert(k, Phase::Preprepared);
        cx.send(Dest::All, Msg::vote(VoteKind::Prepare, v, k, h));
        self.check_position(k, cx);
    }

    fn on_vote(&mut self, m: &SignedMsg, cx: &mut Ctx<'_>) {
        let Some((kind, _, k, h)) = m.body.as_vote() else { return };
        if kind == VoteKind::Precommit && self.variant != Variant::HotStuff {
            return;
        }
        let bucket = self.votes.entry((kind, k, h.clone())).or_default();
        if bucket.iter().any(|o| o.signer == m.signer) {
            return;
        }
        bucket.push(m.clone());
        self.check_position(k, cx);
    }

    fn quorum_cert(&self, kind: VoteKind, k: Pos, h: &Digest) -> Option<Cert> {
        let q = self.q();
        self.votes
            .get(&(kind, k, h.clone()))
            .filter(|b| b.len() >= q)
            .map(|b| Arc::new(b[..q].to_vec()))
    }

    /// Re-evaluates the vote-quorum handlers for position `k`.
    pub(crate) fn check_position(&mut self, k: Pos, cx: &mut Ctx<'_>) {
        let v = self.curr_view;
        let hotstuff = self.variant == Variant::HotStuff;
        while self.status == Status::Normal {
            match self.phase_of(k) {
                Phase::Preprepared => {
                    let x = self.log[&k].clone();
                    let h = x.digest();
                    let Some(c) = self.quorum_cert(VoteKind::Prepare, k, &h) else { break };
                    self.prep.insert(k, Prep { value: x, view: v, cert: c });
                    self.phase.insert(k, Phase::Prepared);
                    let next = if hotstuff { VoteKind::Precommit } else { VoteKind::Commit };
                    cx.send(Dest::All, Msg::vote(next, v, k, h));
                }
                Phase::Prepared if hotstuff => {
                    let h = self.prep[&k].value.digest();
                    if self.quorum_cert(VoteKind::Precommit, k, &h).is_none() {
                        break;
                    }
                    self.lock.insert(k, (v, h.clone()));
                    self.phase.insert(k, Phase::Precommitted);
                    cx.send(Dest::All, Msg::vote(VoteKind::Commit, v, k, h));
                }
                Phase::Prepared | Phase::Precommitted => {
                    let h = self.prep[&k].value.digest();
                    let Some(c) = self.quorum_cert(VoteKind::Commit, k, &h) else { break };
                    self.phase.insert(k, Phase::Committed);
                    let x = self.log[&k].clone();
                    self.commit(k, x, c, cx);
                }
                Phase::Start | Phase::Committed => break,
            }
        }
    }

    fn commit(&mut self, k: Pos, x: Value, c: Cert, cx: &mut Ctx<'_>) {
        if self.commit_log.contains_key(&k) {
            return;
        }
        self.commit_log.insert(k, x.clone());
        self.dec_known.insert(k, (x.clone(), c.clone()));
        cx.send(Dest::All, Msg::Decision { position: k, value: x, cert: c });
        let now = cx.now();
        for p in 0..self.p.n {
            self.dec_sent.insert((k, p), now);
        }
        self.try_deliver(cx);
    }

    fn send_decision(&mut self, k: Pos, to: Pid, cx: &mut Ctx<'_>) {
        if let Some((x, c)) = self.dec_known.get(&k) {
            let body = Msg::Decision { position: k, value: x.clone(), cert: c.clone() };
            cx.send(Dest::To(to), body);
            self.dec_sent.insert((k, to), cx.now());
        }
    }

    fn on_decision(&mut self, m: &SignedMsg, k: Pos, x: &Value, c: &Cert, cx: &mut Ctx<'_>) {
        let from = m.signer;
        if from != self.pid {
            self.dec_heard.entry(k).or_default().insert(from);
        }
        if self.commit_log.contains_key(&k) {
            // The sender keeps retransmitting until it hears from us.
            let recent = self
                .dec_sent
                .get(&(k, from))
                .is_some_and(|&t| cx.now() < t + self.p.rho);
            if from != self.pid && !recent {
                self.send_decision(k, from, cx);
            }
            return;
        }
        if k == 0 || !committed_some_view(&self.keys, c, k, &x.digest(), self.q()) {
            return;
        }
        self.commit_log.insert(k, x.clone());
        self.dec_known.insert(k, (x.clone(), c.clone()));
        if from != self.pid {
            self.send_decision(k, from, cx);
        }
        self.try_deliver(cx);
    }

    fn resend_decisions(&mut self, cx: &mut Ctx<'_>) {
        let now = cx.now();
        let mut out = Vec::new();
        for p in (0..self.p.n).filter(|&p| p != self.pid) {
            let mut sent = 0;
            for &k in self.dec_known.keys() {
                if sent == DECISION_RESEND_LIMIT {
                    break;
                }
                if self.dec_heard.get(&k).is_some_and(|s| s.contains(&p)) {
                    continue;
                }
                if self.dec_sent.get(&(k, p)).is_some_and(|&t| now < t + self.p.rho) {
                    continue;
                }
                out.push((k, p));
                sent += 1;
            }
        }
        for (k, p) in out {
            self.send_decision(k, p, cx);
        }
    }

    fn on_new_leader(&mut self, m: SignedMsg, cx: &mut Ctx<'_>) {
        if !self.is_leader() || self.status != Status::Initializing || self.new_state_sent {
            return;
        }
        if self.new_leaders.iter().any(|o| o.signer == m.signer) {
            return;
        }
        if !valid_new_leader(&self.keys, &m, self.curr_view, self.q()) {
            return;
        }
        self.new_leaders.push(m);
        if self.new_leaders.len() >= self.q() {
            let quorum: Vec<SignedMsg> = self.new_leaders[..self.q()].to_vec();
            match self.variant {
                Variant::Light => self.light_leader_init(quorum, cx),
                Variant::Rotation => self.rotation_leader_init(quorum, cx),
                Variant::HotStuff => self.hotstuff_leader_init(quorum, cx),
            }
            self.new_state_sent = true;
        }
    }

    fn on_new_state(&mut self, m: &SignedMsg, cx: &mut Ctx<'_>) {
        if self.status != Status::Initializing || m.signer != leader(self.curr_view, self.p.n) {
            return;
        }
        let adopted = match self.variant {
            Variant::Light | Variant::Rotation => self.pbft_valid_new_state(m),
            Variant::HotStuff => self.hotstuff_valid_new_state(m),
        };
        let Some(log) = adopted else { return };
        match self.variant {
            Variant::Light => self.light_adopt(log, cx),
            Variant::Rotation | Variant::HotStuff => self.rotation_adopt(log, cx),
        }
    }

    /// Sends PREPAREs for the adopted log and re-evaluates quorums.
    pub(crate) fn prepare_log(&mut self, cx: &mut Ctx<'_>) {
        let v = self.curr_view;
        let ks: Vec<Pos> = self.log.keys().copied().collect();
        for &k in &ks {
            self.phase.insert(k, Phase::Preprepared);
            cx.send(Dest::All, Msg::vote(VoteKind::Prepare, v, k, self.log[&k].digest()));
        }
    }

    pub(crate) fn recheck_log(&mut self, cx: &mut Ctx<'_>) {
        let ks: Vec<Pos> = self.log.keys().copied().collect();
        for k in ks {
            self.check_position(k, cx);
        }
    }

    pub(crate) fn try_deliver(&mut self, cx: &mut Ctx<'_>) {
        match self.variant {
            Variant::Light => self.light_deliver(cx),
            Variant::Rotation | Variant::HotStuff => self.rotation_deliver(cx),
        }
    }

    /// Runs guarded handlers whose guards may have become true.
    fn settle(&mut self, cx: &mut Ctx<'_>) {
        self.try_deliver(cx);
        if self.status == Status::Normal {
            for m in std::mem::take(&mut self.pending_normal) {
                self.on_current(m, cx);
            }
            for (kind, x) in std::mem::take(&mut self.pending_values) {
                self.on_value_msg(kind, x, cx);
            }
        }
        if self.variant != Variant::Light {
            self.leader_propose(cx);
        }
    }
}

impl Upper for Replica {
    fn on_start(&mut self, cx: &mut Ctx<'_>) {
        if self.curr_view == 0 {
            cx.request_advance(AdvanceCause::Start);
        }
    }

    fn on_new_view(&mut self, v: View, cx: &mut Ctx<'_>) {
        self.enter_view(v, cx);
        self.settle(cx);
    }

    fn on_message(&mut self, _from: Pid, m: &SignedMsg, cx: &mut Ctx<'_>) {
        match &m.body {
            Msg::Broadcast { value } => self.on_value_msg(ValueMsg::Broadcast, value.clone(), cx),
            Msg::Forward { value } => self.on_value_msg(ValueMsg::Forward, value.clone(), cx),
            Msg::Decision { position, value, cert } => {
                let (k, x, c) = (*position, value.clone(), cert.clone());
                self.on_decision(m, k, &x, &c, cx);
            }
            body => {
                let Some(v) = body.view() else { return };
                if v > self.curr_view {
                    self.future.insert(m.clone());
                } else if v == self.curr_view {
                    self.on_current(m.clone(), cx);
                }
            }
        }
        self.settle(cx);
    }

    fn on_timer(&mut self, id: TimerId, cx: &mut Ctx<'_>) {
        match (self.variant, id) {
            (Variant::Light, TimerId::Delivery(x)) => {
                self.active_delivery.remove(&x);
                self.expire(cx);
            }
            (_, TimerId::Recovery) => self.expire(cx),
            (Variant::Rotation | Variant::HotStuff, TimerId::DeliveryBatch) => self.expire(cx),
            (Variant::Rotation | Variant::HotStuff, TimerId::Broadcast) => self.on_broadcast_timer(cx),
            _ => {}
        }
        self.settle(cx);
    }

    fn on_periodic(&mut self, cx: &mut Ctx<'_>) {
        for x in self.own.clone() {
            cx.send(Dest::All, Msg::Broadcast { value: x });
        }
        self.resend_decisions(cx);
        self.settle(cx);
    }

    fn on_client_broadcast(&mut self, x: Value, cx: &mut Ctx<'_>) {
        if !x.valid() || self.own.contains(&x) || self.delivered.contains(&x) {
            return;
        }
        self.own.push(x.clone());
        cx.send(Dest::All, Msg::Broadcast { value: x });
        self.settle(cx);
    }

    fn future_usage(&self) -> (usize, usize) {
        (self.future.slots(), self.future.messages())
    }
}
