//! Byzantine processes.
//!
//! A faulty process runs a correct node internally and tampers with what it
//! sends. It can only sign as itself.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Behavior;
use crate::msg::{Msg, PreparedEntry, SignedMsg, Value, VoteKind, MINTED_ID_BASE};
use crate::node::{Action, Ctx, Input, MemUsage, Node};
use crate::trace::Dest;
use crate::{Pid, Pos, View};

pub struct ByzantineNode {
    inner: Box<dyn Node>,
    behavior: Behavior,
    n: usize,
    rng: ChaCha8Rng,
    /// Highest view seen in any WISH; random and spam views start here.
    high: View,
    minted: u64,
    /// Oldest prepared entry ever reported, per position.
    stale: BTreeMap<Pos, PreparedEntry>,
}

impl ByzantineNode {
    pub fn new(pid: Pid, n: usize, seed: u64, behavior: Behavior, inner: Box<dyn Node>) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(seed ^ (pid as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        ByzantineNode { inner, behavior, n, rng, high: 0, minted: 0, stale: BTreeMap::new() }
    }

    fn mint(&mut self) -> Value {
        self.minted += 1;
        Value::op(MINTED_ID_BASE + self.minted, "minted")
    }

    /// Extra traffic generated on top of the inner node's.
    fn inject(&mut self, input: &Input, cx: &mut Ctx<'_>) {
        match (&self.behavior, input) {
            (Behavior::RandomWish { max_jump }, Input::Periodic) => {
                let max_jump = (*max_jump).max(1);
                let mut all: Vec<Pid> = (0..self.n).collect();
                let k = self.rng.gen_range(1..=self.n);
                all.shuffle(&mut self.rng);
                for &p in &all[..k] {
                    let v = self.rng.gen_range(1..=self.high + max_jump);
                    cx.send(Dest::To(p), Msg::Wish { v });
                }
            }
            (Behavior::WishSpam { step }, Input::Periodic) => {
                self.high += (*step).max(1);
                let v = self.high;
                cx.send(Dest::All, Msg::Wish { v });
                let x = self.mint();
                for body in [
                    Msg::Preprepare { view: v, position: 1, value: x.clone() },
                    Msg::vote(VoteKind::Prepare, v, 1, x.digest()),
                    Msg::vote(VoteKind::Precommit, v, 1, x.digest()),
                    Msg::vote(VoteKind::Commit, v, 1, x.digest()),
                    Msg::NewLeader { view: v, prepared: Vec::new() },
                    Msg::NewState { view: v, entries: Vec::new(), quorum: Vec::new() },
                ] {
                    cx.send(Dest::All, body);
                }
            }
            (Behavior::Equivocate, Input::Message { msg, .. }) => {
                // Vote for anything proposed, in every phase.
                if let Msg::Preprepare { view, position, value } = &msg.body {
                    for kind in [VoteKind::Prepare, VoteKind::Precommit, VoteKind::Commit] {
                        cx.send(Dest::All, Msg::vote(kind, *view, *position, value.digest()));
                    }
                }
            }
            _ => {}
        }
    }

    fn rewrite(&mut self, a: Action, pid: Pid, cx: &mut Ctx<'_>, out: &mut Vec<Action>) {
        let Action::Send { dest, msg } = a else {
            out.push(a);
            return;
        };
        let resign = |cx: &Ctx<'_>, body: Msg| -> SignedMsg { cx.sign(body) };
        match (&self.behavior, &msg.body) {
            (Behavior::Withhold, Msg::Preprepare { .. } | Msg::NewState { .. }) => {}
            (Behavior::Censor { ids }, Msg::Preprepare { view, position, value })
                if value.id().is_some_and(|id| ids.contains(&id)) =>
            {
                let body = Msg::Preprepare { view: *view, position: *position, value: Value::Nop };
                out.push(Action::Send { dest, msg: resign(cx, body) });
            }
            (Behavior::Equivocate, Msg::Preprepare { view, position, value }) if dest == Dest::All => {
                let other = self.mint();
                let half = self.n / 2;
                for p in 0..self.n {
                    let x = if p < half || p == pid { value.clone() } else { other.clone() };
                    let body = Msg::Preprepare { view: *view, position: *position, value: x };
                    out.push(Action::Send { dest: Dest::To(p), msg: resign(cx, body) });
                }
            }
            (Behavior::StaleCert, Msg::NewLeader { view, prepared }) => {
                for e in prepared {
                    let keep = self.stale.get(&e.position).is_some_and(|s| s.prep_view <= e.prep_view);
                    if !keep {
                        self.stale.insert(e.position, e.clone());
                    }
                }
                let body = Msg::NewLeader { view: *view, prepared: self.stale.values().cloned().collect() };
                out.push(Action::Send { dest, msg: resign(cx, body) });
            }
            _ => out.push(Action::Send { dest, msg }),
        }
    }
}

impl Node for ByzantineNode {
    fn handle(&mut self, cx: &mut Ctx<'_>, input: Input) {
        if let Behavior::Crash { at } = self.behavior {
            if cx.real() >= at {
                return;
            }
        }
        if let Input::Message { msg, .. } = &input {
            if let Msg::Wish { v } = msg.body {
                self.high = self.high.max(v);
            }
        }
        self.inner.handle(cx, input.clone());
        let actions = cx.take_actions();
        let pid = cx.pid();
        let mut out = Vec::with_capacity(actions.len());
        for a in actions {
            self.rewrite(a, pid, cx, &mut out);
        }
        for a in out {
            cx.push(a);
        }
        self.inject(&input, cx);
    }

    fn mem(&self) -> MemUsage {
        self.inner.mem()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::KeyRing;

    struct Echo;

    impl Node for Echo {
        fn handle(&mut self, cx: &mut Ctx<'_>, input: Input) {
            if let Input::ClientBroadcast(x) = input {
                cx.send(Dest::All, Msg::Preprepare { view: 1, position: 1, value: x });
            }
        }
        fn mem(&self) -> MemUsage {
            MemUsage::default()
        }
    }

    fn run(behavior: Behavior, real: u64) -> Vec<Action> {
        let keys = KeyRing::new(4, 1);
        let signer = keys.signer(0);
        let mut node = ByzantineNode::new(0, 4, 7, behavior, Box::new(Echo));
        let mut cx = Ctx::new(0, real, real, &signer);
        node.handle(&mut cx, Input::ClientBroadcast(Value::op(5, "x")));
        cx.take_actions()
    }

    #[test]
    fn crash_stops_everything() {
        assert_eq!(run(Behavior::Crash { at: 10 }, 5).len(), 1);
        assert!(run(Behavior::Crash { at: 10 }, 10).is_empty());
    }

    #[test]
    fn withhold_drops_proposals() {
        assert!(run(Behavior::Withhold, 0).is_empty());
    }

    #[test]
    fn censor_replaces_with_nop() {
        let out = run(Behavior::Censor { ids: vec![5] }, 0);
        let Action::Send { msg, .. } = &out[0] else { panic!() };
        assert!(matches!(&msg.body, Msg::Preprepare { value: Value::Nop, .. }));
    }

    #[test]
    fn equivocation_splits_the_system() {
        let keys = KeyRing::new(4, 1);
        let out = run(Behavior::Equivocate, 0);
        assert_eq!(out.len(), 4);
        let values: Vec<Value> = out
            .iter()
            .map(|a| match a {
                Action::Send { msg, .. } => {
                    assert!(keys.verify(msg));
                    match &msg.body {
                        Msg::Preprepare { value, .. } => value.clone(),
                        _ => panic!(),
                    }
                }
                _ => panic!(),
            })
            .collect();
        assert_eq!(values[0], values[1]);
        assert_ne!(values[1], values[2]);
        assert_eq!(values[2], values[3]);
    }
}
