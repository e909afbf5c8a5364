//! PBFT-light: a stable leader per view, per-value delivery timers, and a
//! view change driven by the synchronizer.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::bft::{fill_log, leader, select_prepared, valid_new_leader, Replica, Selected, Variant};
use crate::msg::{KeyRing, Msg, SignedMsg, StateEntry, Value};
use crate::node::{Ctx, ProtocolParams};
use crate::trace::{Dest, TimerId};
use crate::{Pid, Pos, View};

pub fn replica(pid: Pid, p: ProtocolParams, keys: Arc<KeyRing>) -> Replica {
    Replica::new(pid, Variant::Light, p, keys)
}

/// `(prep_view, value)` per position, restricted to `k <= limit` if given.
pub(crate) fn as_entries(sel: &BTreeMap<Pos, Selected>, limit: Option<Pos>) -> BTreeMap<Pos, (View, Value)> {
    sel.iter()
        .filter(|(k, _)| limit.is_none_or(|l| **k <= l))
        .map(|(k, s)| (*k, (s.prep_view, s.value.clone())))
        .collect()
}

impl Replica {
    pub(crate) fn light_on_broadcast(&mut self, x: Value, cx: &mut Ctx<'_>) {
        if self.active_delivery.contains(&x) {
            return;
        }
        cx.start_timer(TimerId::Delivery(x.clone()), self.dur_delivery);
        self.active_delivery.insert(x.clone());
        cx.send(Dest::To(leader(self.curr_view, self.p.n)), Msg::Forward { value: x });
    }

    pub(crate) fn light_on_forward(&mut self, x: Value, cx: &mut Ctx<'_>) {
        if !self.is_leader() || self.in_log(&x) || self.proposed.contains(&x) {
            return;
        }
        let k = self.next;
        self.proposed.insert(x.clone());
        self.next += 1;
        cx.send(Dest::All, Msg::Preprepare { view: self.curr_view, position: k, value: x });
    }

    /// Upper end of the initial log for a view: the highest reported position
    /// for PBFT-light, `(v-1)B` for the rotation protocol.
    fn init_limit(&self, entries: &BTreeMap<Pos, (View, Value)>) -> Pos {
        match self.variant {
            Variant::Light => entries.keys().next_back().copied().unwrap_or(0),
            _ => (self.curr_view - 1) * self.p.batch,
        }
    }

    fn batch_limit(&self) -> Option<Pos> {
        (self.variant != Variant::Light).then(|| (self.curr_view - 1) * self.p.batch)
    }

    pub(crate) fn light_leader_init(&mut self, quorum: Vec<SignedMsg>, cx: &mut Ctx<'_>) {
        let entries = as_entries(&select_prepared(&quorum), self.batch_limit());
        let limit = self.init_limit(&entries);
        let log = fill_log(&entries, limit);
        self.next = limit + 1;
        let entries = log
            .into_iter()
            .map(|(position, value)| StateEntry { position, value, prep_view: None, cert: None })
            .collect();
        cx.send(Dest::All, Msg::NewState { view: self.curr_view, entries, quorum });
        if self.variant == Variant::Rotation {
            cx.start_timer(TimerId::Broadcast, self.p.t_broadcast);
        }
    }

    /// Recomputes the leader's log from the attached NEW_LEADER quorum.
    pub(crate) fn pbft_valid_new_state(&self, m: &SignedMsg) -> Option<BTreeMap<Pos, Value>> {
        let Msg::NewState { view, entries, quorum } = &m.body else { return None };
        let v = *view;
        if v != self.curr_view {
            return None;
        }
        let q = self.q();
        let mut signers = BTreeSet::new();
        let quorum_ok = quorum.len() >= q
            && quorum.iter().all(|r| {
                signers.insert(r.signer) && self.keys.verify(r) && valid_new_leader(&self.keys, r, v, q)
            });
        if !quorum_ok {
            return None;
        }
        let selected = as_entries(&select_prepared(quorum), self.batch_limit());
        let expected = fill_log(&selected, self.init_limit(&selected));
        let mut got = BTreeMap::new();
        for e in entries {
            if e.prep_view.is_some() || e.cert.is_some() || got.insert(e.position, e.value.clone()).is_some() {
                return None;
            }
        }
        (got == expected).then_some(got)
    }

    pub(crate) fn light_adopt(&mut self, log: BTreeMap<Pos, Value>, cx: &mut Ctx<'_>) {
        self.init_log_length = log.keys().next_back().copied().unwrap_or(0);
        self.replace_log(log);
        self.prepare_log(cx);
        self.status = crate::bft::Status::Normal;
        if self.init_log_length <= self.last_delivered {
            cx.stop_timer(TimerId::Recovery);
        }
        self.recheck_log(cx);
    }

    pub(crate) fn light_deliver(&mut self, cx: &mut Ctx<'_>) {
        while let Some(x) = self.commit_log.get(&(self.last_delivered + 1)).cloned() {
            self.last_delivered += 1;
            let k = self.last_delivered;
            if !x.is_nop() {
                self.deliver(k, &x, cx);
            }
            if self.active_delivery.remove(&x) {
                cx.stop_timer(TimerId::Delivery(x));
            }
            if k == self.init_log_length && self.status == crate::bft::Status::Normal {
                cx.stop_timer(TimerId::Recovery);
            }
        }
    }
}
