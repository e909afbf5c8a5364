//! Wire messages, values, simulated signatures and certificate predicates.

use std::collections::BTreeSet;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Pid, Pos, View};

/// A value submitted to atomic broadcast, or the leader's filler `nop`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Nop,
    Op { id: u64, payload: Arc<str> },
}

/// Byzantine processes mint values with ids at or above this.
pub const MINTED_ID_BASE: u64 = 1 << 40;

impl Value {
    pub fn op(id: u64, payload: impl Into<Arc<str>>) -> Self {
        Value::Op { id, payload: payload.into() }
    }

    pub fn is_nop(&self) -> bool {
        matches!(self, Value::Nop)
    }

    pub fn id(&self) -> Option<u64> {
        match self {
            Value::Nop => None,
            Value::Op { id, .. } => Some(*id),
        }
    }

    /// Application validity predicate. Payloads prefixed with `invalid` are
    /// rejected so adversaries can be tested against it.
    pub fn valid(&self) -> bool {
        match self {
            Value::Nop => true,
            Value::Op { payload, .. } => !payload.starts_with("invalid"),
        }
    }

    pub fn digest(&self) -> Digest {
        Digest(self.clone())
    }
}

/// Collision-free value digest: the value itself stands in for its hash.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(pub Value);

/// Vote message kinds that form certificates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VoteKind {
    Prepare,
    Precommit,
    Commit,
}

pub type SignedMsg = Arc<Signed>;

/// A quorum of signed votes, serialized as a message array.
pub type Cert = Arc<Vec<SignedMsg>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreparedEntry {
    pub position: Pos,
    pub prep_view: View,
    pub value: Value,
    pub cert: Cert,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateEntry {
    pub position: Pos,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep_view: Option<View>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert: Option<Cert>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Msg {
    Wish {
        v: View,
    },
    Broadcast {
        value: Value,
    },
    Forward {
        value: Value,
    },
    Preprepare {
        view: View,
        position: Pos,
        value: Value,
    },
    Prepare {
        view: View,
        position: Pos,
        hash: Digest,
    },
    Precommit {
        view: View,
        position: Pos,
        hash: Digest,
    },
    Commit {
        view: View,
        position: Pos,
        hash: Digest,
    },
    Decision {
        position: Pos,
        value: Value,
        cert: Cert,
    },
    NewLeader {
        view: View,
        prepared: Vec<PreparedEntry>,
    },
    /// `quorum` carries the NEW_LEADER messages the log was computed from;
    /// it is empty when entries carry their own certificates.
    NewState {
        view: View,
        entries: Vec<StateEntry>,
        #[serde(default)]
        quorum: Vec<SignedMsg>,
    },
}

impl Msg {
    pub fn vote(kind: VoteKind, view: View, position: Pos, hash: Digest) -> Msg {
        match kind {
            VoteKind::Prepare => Msg::Prepare { view, position, hash },
            VoteKind::Precommit => Msg::Precommit { view, position, hash },
            VoteKind::Commit => Msg::Commit { view, position, hash },
        }
    }

    /// `(kind, view, position, hash)` if this is a vote.
    pub fn as_vote(&self) -> Option<(VoteKind, View, Pos, &Digest)> {
        match self {
            Msg::Prepare { view, position, hash } => Some((VoteKind::Prepare, *view, *position, hash)),
            Msg::Precommit { view, position, hash } => {
                Some((VoteKind::Precommit, *view, *position, hash))
            }
            Msg::Commit { view, position, hash } => Some((VoteKind::Commit, *view, *position, hash)),
            _ => None,
        }
    }

    /// View carried by view-scoped protocol messages.
    pub fn view(&self) -> Option<View> {
        match self {
            Msg::Preprepare { view, .. }
            | Msg::Prepare { view, .. }
            | Msg::Precommit { view, .. }
            | Msg::Commit { view, .. }
            | Msg::NewLeader { view, .. }
            | Msg::NewState { view, .. } => Some(*view),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Msg::Wish { .. } => "WISH",
            Msg::Broadcast { .. } => "BROADCAST",
            Msg::Forward { .. } => "FORWARD",
            Msg::Preprepare { .. } => "PREPREPARE",
            Msg::Prepare { .. } => "PREPARE",
            Msg::Precommit { .. } => "PRECOMMIT",
            Msg::Commit { .. } => "COMMIT",
            Msg::Decision { .. } => "DECISION",
            Msg::NewLeader { .. } => "NEW_LEADER",
            Msg::NewState { .. } => "NEW_STATE",
        }
    }

    /// Signed messages nested in this one (certificates, view-change quorums).
    pub fn embedded(&self) -> Vec<&SignedMsg> {
        let mut out = Vec::new();
        match self {
            Msg::Decision { cert, .. } => out.extend(cert.iter()),
            Msg::NewLeader { prepared, .. } => {
                for e in prepared {
                    out.extend(e.cert.iter());
                }
            }
            Msg::NewState { entries, quorum, .. } => {
                for e in entries {
                    if let Some(c) = &e.cert {
                        out.extend(c.iter());
                    }
                }
                out.extend(quorum.iter());
            }
            _ => {}
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signed {
    #[serde(flatten)]
    pub body: Msg,
    pub signer: Pid,
    pub sig: u64,
}

fn tag(secret: u64, body: &Msg) -> u64 {
    let mut h = DefaultHasher::new();
    secret.hash(&mut h);
    body.hash(&mut h);
    h.finish()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Public verification keys of all processes.
#[derive(Clone, Debug)]
pub struct KeyRing {
    secrets: Vec<u64>,
}

impl KeyRing {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut s = seed ^ 0x5157_4a1d_c0de_f00d;
        let secrets = (0..n)
            .map(|_| {
                s = splitmix(s);
                s
            })
            .collect();
        KeyRing { secrets }
    }

    pub fn n(&self) -> usize {
        self.secrets.len()
    }

    pub fn verify(&self, m: &Signed) -> bool {
        self.secrets
            .get(m.signer)
            .is_some_and(|&s| tag(s, &m.body) == m.sig)
    }

    /// Signing capability for one process.
    pub fn signer(&self, pid: Pid) -> Signer {
        Signer { pid, secret: self.secrets[pid] }
    }
}

/// Signing key of a single process.
#[derive(Clone, Debug)]
pub struct Signer {
    pid: Pid,
    secret: u64,
}

impl Signer {
    pub fn pid(&self) -> Pid {
        self.pid
    }

    pub fn sign(&self, body: Msg) -> SignedMsg {
        let sig = tag(self.secret, &body);
        Arc::new(Signed { body, signer: self.pid, sig })
    }
}

/// Leader of view `v >= 1`.
pub fn leader(v: View, n: usize) -> Pid {
    assert!(v >= 1, "view 0 has no leader");
    ((v - 1) % n as u64) as usize
}

/// True iff `cert` consists of correctly signed `kind(v, k, h)` votes from at
/// least `q` distinct processes and nothing else.
pub fn check_cert(
    keys: &KeyRing,
    cert: &[SignedMsg],
    kind: VoteKind,
    v: View,
    k: Pos,
    h: &Digest,
    q: usize,
) -> bool {
    if cert.len() < q {
        return false;
    }
    let mut signers = BTreeSet::new();
    cert.iter().all(|m| {
        matches!(m.body.as_vote(), Some((kk, vv, pp, hh)) if kk == kind && vv == v && pp == k && hh == h)
            && signers.insert(m.signer)
            && keys.verify(m)
    })
}

pub fn prepared(keys: &KeyRing, c: &[SignedMsg], v: View, k: Pos, h: &Digest, q: usize) -> bool {
    check_cert(keys, c, VoteKind::Prepare, v, k, h, q)
}

pub fn precommitted(keys: &KeyRing, c: &[SignedMsg], v: View, k: Pos, h: &Digest, q: usize) -> bool {
    check_cert(keys, c, VoteKind::Precommit, v, k, h, q)
}

pub fn committed(keys: &KeyRing, c: &[SignedMsg], v: View, k: Pos, h: &Digest, q: usize) -> bool {
    check_cert(keys, c, VoteKind::Commit, v, k, h, q)
}

/// `∃v. committed(C, v, k, h)`: the view is read off the first vote.
pub fn committed_some_view(keys: &KeyRing, c: &[SignedMsg], k: Pos, h: &Digest, q: usize) -> bool {
    match c.first().and_then(|m| m.body.as_vote()) {
        Some((_, v, _, _)) => committed(keys, c, v, k, h, q),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn votes(keys: &KeyRing, kind: VoteKind, v: View, k: Pos, h: &Digest, who: &[Pid]) -> Vec<SignedMsg> {
        who.iter()
            .map(|&p| keys.signer(p).sign(Msg::vote(kind, v, k, h.clone())))
            .collect()
    }

    #[test]
    fn leader_wraps_around() {
        assert_eq!(leader(1, 4), 0);
        assert_eq!(leader(4, 4), 3);
        assert_eq!(leader(5, 4), 0);
    }

    #[test]
    #[should_panic]
    fn leader_of_view_zero_rejected() {
        leader(0, 4);
    }

    #[test]
    fn signatures_bind_signer_and_body() {
        let keys = KeyRing::new(4, 7);
        let m = keys.signer(2).sign(Msg::Wish { v: 3 });
        assert!(keys.verify(&m));
        let mut forged = (*m).clone();
        forged.signer = 1;
        assert!(!keys.verify(&forged));
        let mut altered = (*m).clone();
        altered.body = Msg::Wish { v: 4 };
        assert!(!keys.verify(&altered));
        let other = KeyRing::new(4, 8);
        assert!(!other.verify(&m));
    }

    #[test]
    fn prepared_needs_quorum_of_matching_votes() {
        let keys = KeyRing::new(4, 1);
        let h = Value::op(1, "a").digest();
        let c = votes(&keys, VoteKind::Prepare, 2, 1, &h, &[0, 1, 3]);
        assert!(prepared(&keys, &c, 2, 1, &h, 3));
        assert!(!prepared(&keys, &c[..2], 2, 1, &h, 3));
        let mut mixed = c.clone();
        mixed[2] = keys.signer(3).sign(Msg::vote(VoteKind::Prepare, 3, 1, h.clone()));
        assert!(!prepared(&keys, &mixed, 2, 1, &h, 3));
        let dup = vec![c[0].clone(), c[0].clone(), c[1].clone()];
        assert!(!prepared(&keys, &dup, 2, 1, &h, 3));
        assert!(!committed(&keys, &c, 2, 1, &h, 3));
    }

    #[test]
    fn wire_form_is_flat() {
        let keys = KeyRing::new(4, 1);
        let m = keys.signer(1).sign(Msg::Wish { v: 5 });
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"type\":\"WISH\",\"v\":5,\"signer\":1,\"sig\":"), "{s}");
        let back: Signed = serde_json::from_str(&s).unwrap();
        assert_eq!(back, *m);
    }

    #[test]
    fn nested_messages_roundtrip() {
        let keys = KeyRing::new(4, 1);
        let x = Value::op(9, "x");
        let c: Cert = Arc::new(votes(&keys, VoteKind::Commit, 1, 2, &x.digest(), &[0, 1, 2]));
        let m = keys.signer(0).sign(Msg::Decision { position: 2, value: x, cert: c });
        let s = serde_json::to_string(&m).unwrap();
        let back: Signed = serde_json::from_str(&s).unwrap();
        assert_eq!(back, *m);
        assert!(keys.verify(&back));
        assert_eq!(back.body.embedded().len(), 3);
    }
}
