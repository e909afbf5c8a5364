use std::collections::BTreeMap;

use crate::msg::SignedMsg;
use crate::{Pid, View};

/// Messages received for views the process has not entered yet.
///
/// One slot per (message type, sender) remembers only the highest view seen
/// from that sender for that type, together with that sender's messages of
/// this type for that view.
#[derive(Clone, Debug, Default)]
pub struct FutureBuffer {
    slots: BTreeMap<(&'static str, Pid), Slot>,
    seq: u64,
}

#[derive(Clone, Debug)]
struct Slot {
    view: View,
    msgs: Vec<(u64, SignedMsg)>,
}

impl FutureBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `msg` unless a higher view is already held for its slot.
    /// Messages without a view are ignored.
    pub fn insert(&mut self, msg: SignedMsg) {
        let Some(v) = msg.body.view() else { return };
        let key = (msg.body.type_name(), msg.signer);
        self.seq += 1;
        let seq = self.seq;
        match self.slots.get_mut(&key) {
            Some(slot) if slot.view > v => {}
            Some(slot) if slot.view == v => {
                if !slot.msgs.iter().any(|(_, m)| *m == msg) {
                    slot.msgs.push((seq, msg));
                }
            }
            _ => {
                self.slots.insert(key, Slot { view: v, msgs: vec![(seq, msg)] });
            }
        }
    }

    /// Removes every slot at or below `v` and returns the messages for `v`
    /// in arrival order.
    pub fn take_view(&mut self, v: View) -> Vec<SignedMsg> {
        let mut out = Vec::new();
        self.slots.retain(|_, slot| {
            if slot.view > v {
                return true;
            }
            if slot.view == v {
                out.append(&mut slot.msgs);
            }
            false
        });
        out.sort_by_key(|(s, _)| *s);
        out.into_iter().map(|(_, m)| m).collect()
    }

    pub fn slots(&self) -> usize {
        self.slots.len()
    }

    pub fn messages(&self) -> usize {
        self.slots.values().map(|s| s.msgs.len()).sum()
    }

    /// View held for `(type, sender)`, if any.
    pub fn view_of(&self, type_name: &str, sender: Pid) -> Option<View> {
        self.slots
            .iter()
            .find(|((t, p), _)| *t == type_name && *p == sender)
            .map(|(_, s)| s.view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::{KeyRing, Msg, Value};

    fn prepare(keys: &KeyRing, from: Pid, view: View, position: u64) -> SignedMsg {
        keys.signer(from).sign(Msg::Prepare { view, position, hash: Value::Nop.digest() })
    }

    #[test]
    fn keeps_highest_view_per_type_and_sender() {
        let keys = KeyRing::new(4, 0);
        let mut b = FutureBuffer::new();
        b.insert(prepare(&keys, 2, 5, 1));
        assert_eq!(b.view_of("PREPARE", 2), Some(5));
        b.insert(prepare(&keys, 2, 3, 1));
        assert_eq!(b.view_of("PREPARE", 2), Some(5));
        b.insert(prepare(&keys, 2, 7, 1));
        assert_eq!(b.view_of("PREPARE", 2), Some(7));
        assert_eq!((b.slots(), b.messages()), (1, 1));
    }

    #[test]
    fn same_view_messages_share_a_slot() {
        let keys = KeyRing::new(4, 0);
        let mut b = FutureBuffer::new();
        b.insert(prepare(&keys, 1, 4, 1));
        b.insert(prepare(&keys, 1, 4, 2));
        b.insert(prepare(&keys, 1, 4, 2));
        b.insert(prepare(&keys, 3, 6, 1));
        assert_eq!((b.slots(), b.messages()), (2, 2 + 1));
        let got = b.take_view(4);
        assert_eq!(got.len(), 2);
        assert_eq!(b.slots(), 1);
        assert!(b.take_view(5).is_empty());
        assert_eq!(b.slots(), 1);
        assert_eq!(b.take_view(6).len(), 1);
        assert_eq!(b.slots(), 0);
    }

    #[test]
    fn stale_slots_dropped_on_entry() {
        let keys = KeyRing::new(4, 0);
        let mut b = FutureBuffer::new();
        b.insert(prepare(&keys, 1, 2, 1));
        assert!(b.take_view(3).is_empty());
        assert_eq!(b.slots(), 0);
    }
}
