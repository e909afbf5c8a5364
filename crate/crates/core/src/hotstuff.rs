//! HotStuff-light: the rotation protocol with an extra voting phase and
//! locks, so a new leader only ships certificates instead of a whole quorum
//! of view-change reports.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bft::{fill_log, select_prepared, Replica, Variant};
use crate::msg::{prepared, KeyRing, Msg, SignedMsg, StateEntry, Value};
use crate::node::{Ctx, ProtocolParams};
use crate::trace::{Dest, TimerId};
use crate::{Pid, Pos, View};

pub fn replica(pid: Pid, p: ProtocolParams, keys: Arc<KeyRing>) -> Replica {
    Replica::new(pid, Variant::HotStuff, p, keys)
}

impl Replica {
    pub(crate) fn hotstuff_leader_init(&mut self, quorum: Vec<SignedMsg>, cx: &mut Ctx<'_>) {
        let limit = (self.curr_view - 1) * self.p.batch;
        let entries = select_prepared(&quorum)
            .into_iter()
            .filter(|(k, _)| *k <= limit)
            .map(|(position, s)| StateEntry {
                position,
                value: s.value,
                prep_view: Some(s.prep_view),
                cert: Some(s.cert),
            })
            .collect();
        self.next = limit + 1;
        cx.send(Dest::All, Msg::NewState { view: self.curr_view, entries, quorum: Vec::new() });
        cx.start_timer(TimerId::Broadcast, self.p.t_broadcast);
    }

    /// Checks certificates and locks, then fills the log as the leader did.
    pub(crate) fn hotstuff_valid_new_state(&self, m: &SignedMsg) -> Option<BTreeMap<Pos, Value>> {
        let Msg::NewState { view, entries, .. } = &m.body else { return None };
        let v = *view;
        if v != self.curr_view {
            return None;
        }
        let limit = (v - 1) * self.p.batch;
        let q = self.q();
        let mut got: BTreeMap<Pos, (View, Value)> = BTreeMap::new();
        for e in entries {
            let (Some(pv), Some(cert)) = (e.prep_view, e.cert.as_ref()) else { return None };
            let k = e.position;
            let h = e.value.digest();
            if k == 0 || k > limit || pv >= v || !prepared(&self.keys, cert, pv, k, &h, q) {
                return None;
            }
            let lock_ok = match self.lock.get(&k) {
                None => true,
                Some((lv, lh)) => pv > *lv || (*lh == h && pv >= *lv),
            };
            if !lock_ok || got.insert(k, (pv, e.value.clone())).is_some() {
                return None;
            }
        }
        if self.lock.keys().any(|k| !got.contains_key(k)) {
            return None;
        }
        Some(fill_log(&got, limit))
    }
}
