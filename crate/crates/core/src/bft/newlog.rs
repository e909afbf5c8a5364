//! Initial log of a view, computed from a quorum of NEW_LEADER reports.

use std::collections::{BTreeMap, HashMap};

use crate::msg::{prepared, Cert, KeyRing, Msg, SignedMsg, Value};
use crate::{Pid, Pos, View};

/// The report chosen for one position: the value prepared in the highest view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selected {
    pub prep_view: View,
    pub reporter: Pid,
    pub value: Value,
    pub cert: Cert,
}

/// Well-formedness of a NEW_LEADER for view `v`: every reported entry was
/// prepared in an earlier view, as its certificate shows.
pub fn valid_new_leader(keys: &KeyRing, m: &SignedMsg, v: View, q: usize) -> bool {
    let Msg::NewLeader { view, prepared: entries } = &m.body else {
        return false;
    };
    if *view != v {
        return false;
    }
    let mut seen = std::collections::BTreeSet::new();
    entries.iter().all(|e| {
        seen.insert(e.position)
            && e.position >= 1
            && (e.prep_view == 0
                || (e.prep_view < v
                    && prepared(keys, &e.cert, e.prep_view, e.position, &e.value.digest(), q)))
    })
}

/// For every position, the report with the highest prepare view; ties go to
/// the lowest process id.
pub fn select_prepared(quorum: &[SignedMsg]) -> BTreeMap<Pos, Selected> {
    let mut out: BTreeMap<Pos, Selected> = BTreeMap::new();
    for m in quorum {
        let Msg::NewLeader { prepared: entries, .. } = &m.body else { continue };
        for e in entries.iter().filter(|e| e.prep_view > 0) {
            let cand = Selected {
                prep_view: e.prep_view,
                reporter: m.signer,
                value: e.value.clone(),
                cert: e.cert.clone(),
            };
            match out.get_mut(&e.position) {
                None => {
                    out.insert(e.position, cand);
                }
                Some(cur) => {
                    if cand.prep_view == cur.prep_view {
                        debug_assert_eq!(cand.value, cur.value, "two values prepared in one view");
                    }
                    if (cand.prep_view, std::cmp::Reverse(cand.reporter))
                        > (cur.prep_view, std::cmp::Reverse(cur.reporter))
                    {
                        *cur = cand;
                    }
                }
            }
        }
    }
    out
}

/// Fills positions `1..=limit`: holes become `nop`, and so does a value whose
/// duplicate elsewhere was prepared in a strictly higher view. Positions are
/// processed in increasing order, each seeing earlier replacements.
pub fn fill_log(entries: &BTreeMap<Pos, (View, Value)>, limit: Pos) -> BTreeMap<Pos, Value> {
    let mut log: BTreeMap<Pos, Value> = entries.iter().map(|(k, (_, x))| (*k, x.clone())).collect();
    let mut at: HashMap<&Value, Vec<Pos>> = HashMap::new();
    for (k, (_, x)) in entries {
        at.entry(x).or_default().push(*k);
    }
    let pv = |k: Pos| entries.get(&k).map_or(0, |(v, _)| *v);
    for k in 1..=limit {
        let Some(x) = log.get(&k).cloned() else {
            log.insert(k, Value::Nop);
            continue;
        };
        let shadowed = at.get(&x).is_some_and(|ks| {
            ks.iter()
                .any(|&k2| k2 != k && log.get(&k2) == Some(&x) && pv(k2) > pv(k))
        });
        if shadowed {
            log.insert(k, Value::Nop);
        }
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::{PreparedEntry, VoteKind};
    use std::sync::Arc;

    fn cert(keys: &KeyRing, v: View, k: Pos, x: &Value) -> Cert {
        Arc::new(
            [0, 1, 2]
                .iter()
                .map(|&p| keys.signer(p).sign(Msg::vote(VoteKind::Prepare, v, k, x.digest())))
                .collect(),
        )
    }

    fn report(keys: &KeyRing, from: Pid, view: View, entries: &[(Pos, View, &Value)]) -> SignedMsg {
        let prepared = entries
            .iter()
            .map(|&(k, pv, x)| PreparedEntry { position: k, prep_view: pv, value: x.clone(), cert: cert(keys, pv, k, x) })
            .collect();
        keys.signer(from).sign(Msg::NewLeader { view, prepared })
    }

    fn as_entries(sel: &BTreeMap<Pos, Selected>) -> BTreeMap<Pos, (View, Value)> {
        sel.iter().map(|(k, s)| (*k, (s.prep_view, s.value.clone()))).collect()
    }

    #[test]
    fn highest_prepare_view_wins() {
        let keys = KeyRing::new(4, 0);
        let (x, y) = (Value::op(1, "x"), Value::op(2, "y"));
        let m = vec![
            report(&keys, 0, 3, &[(1, 2, &x)]),
            report(&keys, 1, 3, &[(1, 1, &y)]),
            report(&keys, 2, 3, &[]),
        ];
        assert!(m.iter().all(|r| valid_new_leader(&keys, r, 3, 3)));
        let sel = select_prepared(&m);
        assert_eq!(sel[&1].value, x);
        assert_eq!(sel[&1].reporter, 0);
    }

    #[test]
    fn holes_become_nop() {
        let (a, b) = (Value::op(1, "a"), Value::op(2, "b"));
        let e = BTreeMap::from([(1, (1, a.clone())), (3, (1, b.clone()))]);
        let log = fill_log(&e, 3);
        assert_eq!(log, BTreeMap::from([(1, a), (2, Value::Nop), (3, b)]));
    }

    #[test]
    fn older_duplicate_becomes_nop() {
        let x = Value::op(7, "x");
        let e = BTreeMap::from([(2, (3, x.clone())), (5, (1, x.clone()))]);
        let log = fill_log(&e, 5);
        assert_eq!(log[&2], x);
        assert_eq!(log[&5], Value::Nop);
        assert_eq!(log[&1], Value::Nop);
    }

    #[test]
    fn newer_duplicate_first_is_kept() {
        let x = Value::op(7, "x");
        let e = BTreeMap::from([(1, (1, x.clone())), (2, (4, x.clone()))]);
        let log = fill_log(&e, 2);
        assert_eq!(log[&1], Value::Nop);
        assert_eq!(log[&2], x);
    }

    #[test]
    fn new_leader_with_bad_cert_rejected() {
        let keys = KeyRing::new(4, 0);
        let x = Value::op(1, "x");
        let good = report(&keys, 0, 3, &[(1, 2, &x)]);
        assert!(valid_new_leader(&keys, &good, 3, 3));
        // Prepared in a view that is not lower than the new one.
        assert!(!valid_new_leader(&keys, &good, 2, 3));
        let Msg::NewLeader { prepared, .. } = &good.body else { unreachable!() };
        let mut bad = prepared.clone();
        bad[0].value = Value::op(2, "y");
        let forged = keys.signer(0).sign(Msg::NewLeader { view: 3, prepared: bad });
        assert!(!valid_new_leader(&keys, &forged, 3, 3));
    }

    #[test]
    fn selection_is_order_independent() {
        let keys = KeyRing::new(4, 0);
        let (x, y) = (Value::op(1, "x"), Value::op(2, "y"));
        let mut m = vec![
            report(&keys, 2, 5, &[(1, 3, &x), (2, 1, &y)]),
            report(&keys, 0, 5, &[(1, 3, &x)]),
            report(&keys, 1, 5, &[(2, 4, &x)]),
        ];
        let a = as_entries(&select_prepared(&m));
        m.reverse();
        let b = as_entries(&select_prepared(&m));
        assert_eq!(a, b);
        assert_eq!(select_prepared(&m)[&1].reporter, 0);
    }
}
