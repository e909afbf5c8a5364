//! PBFT-rotation: the leader changes every `B` positions. Processes call
//! `advance` after delivering a full batch instead of waiting for a timeout.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bft::{Replica, Status, Variant};
use crate::msg::{KeyRing, Msg, Value};
use crate::node::{Ctx, ProtocolParams};
use crate::trace::TimerId;
use crate::{Pid, Pos};

pub fn replica(pid: Pid, p: ProtocolParams, keys: Arc<KeyRing>) -> Replica {
    Replica::new(pid, Variant::Rotation, p, keys)
}

impl Replica {
    fn batch_end(&self) -> Pos {
        self.curr_view * self.p.batch
    }

    pub(crate) fn rotation_on_broadcast(&mut self, x: Value) {
        if !self.queue.contains(&x) {
            self.queue.push_back(x);
        }
    }

    fn propagate(&mut self, x: Value, cx: &mut Ctx<'_>) {
        let k = self.next;
        if !x.is_nop() {
            self.proposed.insert(x.clone());
        }
        self.next += 1;
        cx.send(crate::trace::Dest::All, Msg::Preprepare { view: self.curr_view, position: k, value: x });
        if self.next <= self.batch_end() {
            cx.start_timer(TimerId::Broadcast, self.p.t_broadcast);
        }
    }

    /// Proposes queued values while the batch has room.
    pub(crate) fn leader_propose(&mut self, cx: &mut Ctx<'_>) {
        while self.status == Status::Normal && self.is_leader() && self.next <= self.batch_end() {
            let Some(x) = self
                .queue
                .iter()
                .find(|x| !self.in_log(x) && !self.proposed.contains(*x))
                .cloned()
            else {
                break;
            };
            cx.stop_timer(TimerId::Broadcast);
            self.propagate(x, cx);
        }
    }

    pub(crate) fn on_broadcast_timer(&mut self, cx: &mut Ctx<'_>) {
        if self.is_leader() && self.new_state_sent && self.status != Status::Advanced && self.next <= self.batch_end() {
            self.propagate(Value::Nop, cx);
        }
    }

    pub(crate) fn rotation_leader_init(&mut self, quorum: Vec<crate::msg::SignedMsg>, cx: &mut Ctx<'_>) {
        self.light_leader_init(quorum, cx);
    }

    /// Adopts a validated initial log (PBFT-rotation and HotStuff-light).
    pub(crate) fn rotation_adopt(&mut self, log: BTreeMap<Pos, Value>, cx: &mut Ctx<'_>) {
        cx.stop_timer(TimerId::Recovery);
        self.replace_log(log);
        if self.last_delivered >= self.batch_end() {
            self.advance_batch(cx);
            return;
        }
        self.prepare_log(cx);
        cx.start_timer(TimerId::DeliveryBatch, self.dur_delivery);
        self.status = Status::Normal;
        self.recheck_log(cx);
    }

    pub(crate) fn rotation_deliver(&mut self, cx: &mut Ctx<'_>) {
        let hotstuff = self.variant == Variant::HotStuff;
        loop {
            if hotstuff && self.status != Status::Normal {
                break;
            }
            let Some(x) = self.commit_log.get(&(self.last_delivered + 1)).cloned() else { break };
            self.last_delivered += 1;
            let k = self.last_delivered;
            if !x.is_nop() {
                self.deliver(k, &x, cx);
                self.queue.retain(|y| *y != x);
            }
            if self.status == Status::Normal {
                let end = self.batch_end();
                if k == end {
                    self.advance_batch(cx);
                } else if k > end - self.p.batch {
                    cx.stop_timer(TimerId::DeliveryBatch);
                    cx.start_timer(TimerId::DeliveryBatch, self.dur_delivery);
                }
            }
        }
    }
}
