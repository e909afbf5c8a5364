//! Bounded-space WISH synchronizer.
//!
//! Each process only remembers the highest view it heard from every other
//! process. `view` is the (2f+1)-st highest entry, `view_plus` the (f+1)-st
//! highest; a process enters `view` once both agree on a value above the
//! previously entered view.

use crate::{Pid, View};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncState {
    f: usize,
    max_views: Vec<View>,
    view: View,
    view_plus: View,
    advanced: bool,
    last_entered: View,
}

/// Effect of a received WISH.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WishOutcome {
    /// View to enter, if the process enters a new view.
    pub new_view: Option<View>,
    /// WISH to echo to all processes.
    pub echo: Option<View>,
}

/// `(view, view_plus)` for a `max_views` array.
pub fn compute_views(max_views: &[View], f: usize) -> (View, View) {
    let mut sorted = max_views.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let pick = |i: usize| sorted.get(i).copied().unwrap_or(0);
    (pick(2 * f), pick(f))
}

impl SyncState {
    pub fn new(n: usize, f: usize) -> Self {
        SyncState {
            f,
            max_views: vec![0; n],
            view: 0,
            view_plus: 0,
            advanced: false,
            last_entered: 0,
        }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn view_plus(&self) -> View {
        self.view_plus
    }

    pub fn advanced(&self) -> bool {
        self.advanced
    }

    pub fn last_entered(&self) -> View {
        self.last_entered
    }

    pub fn max_views(&self) -> &[View] {
        &self.max_views
    }

    /// Number of view entries stored.
    pub fn entries(&self) -> usize {
        self.max_views.len()
    }

    /// Returns the view to WISH for.
    pub fn advance(&mut self) -> View {
        self.advanced = true;
        (self.view + 1).max(self.view_plus)
    }

    pub fn handle_wish(&mut self, from: Pid, v: View) -> WishOutcome {
        let Some(slot) = self.max_views.get_mut(from) else {
            return WishOutcome::default();
        };
        let (prev_v, prev_plus) = (self.view, self.view_plus);
        if v > *slot {
            *slot = v;
        }
        (self.view, self.view_plus) = compute_views(&self.max_views, self.f);
        let mut out = WishOutcome::default();
        if self.view_plus == self.view && self.view > prev_v {
            out.new_view = Some(self.view);
            self.last_entered = self.view;
            self.advanced = false;
        }
        if self.view_plus > prev_plus {
            out.echo = Some(self.view_plus);
        }
        out
    }

    /// WISH to retransmit in the periodic handler, if any.
    pub fn periodic(&self) -> Option<View> {
        if self.advanced {
            Some((self.view + 1).max(self.view_plus))
        } else if self.view_plus > 0 {
            Some(self.view_plus)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Definition-level oracle: the largest value present in the array that
    /// at least `quorum` entries reach.
    fn oracle(max_views: &[View], quorum: usize) -> View {
        max_views
            .iter()
            .copied()
            .chain(std::iter::once(0))
            .filter(|&v| max_views.iter().filter(|&&w| w >= v).count() >= quorum || v == 0)
            .max()
            .unwrap()
    }

    #[test]
    fn compute_views_examples() {
        assert_eq!(compute_views(&[0, 0, 0, 0], 1), (0, 0));
        assert_eq!(compute_views(&[3, 2, 2, 0], 1), (2, 2));
        assert_eq!(compute_views(&[5, 4, 1, 0], 1), (1, 4));
    }

    #[test]
    fn advance_examples() {
        let mut s = SyncState::new(4, 1);
        assert_eq!(s.advance(), 1);
        assert!(s.advanced());

        let mut s = SyncState::new(4, 1);
        s.max_views = vec![2, 2, 2, 0];
        (s.view, s.view_plus) = compute_views(&s.max_views, 1);
        assert_eq!(s.advance(), 3);

        let mut s = SyncState::new(4, 1);
        s.max_views = vec![5, 4, 1, 0];
        (s.view, s.view_plus) = compute_views(&s.max_views, 1);
        assert_eq!((s.view, s.view_plus), (1, 4));
        assert_eq!(s.advance(), 4);
    }

    #[test]
    fn handle_wish_sequence() {
        let mut s = SyncState::new(4, 1);
        s.handle_wish(0, 1);
        let out = s.handle_wish(1, 1);
        assert_eq!(s.max_views(), &[1, 1, 0, 0]);
        assert_eq!(out, WishOutcome { new_view: None, echo: Some(1) });
        assert_eq!(s.view(), 0);

        s.advance();
        let out = s.handle_wish(2, 1);
        assert_eq!((s.view(), s.view_plus()), (1, 1));
        assert_eq!(out, WishOutcome { new_view: Some(1), echo: None });
        assert!(!s.advanced());

        let before = s.clone();
        let out = s.handle_wish(1, 1);
        assert_eq!(out, WishOutcome::default());
        assert_eq!(s, before);
    }

    #[test]
    fn periodic_examples() {
        let mut s = SyncState::new(4, 1);
        assert_eq!(s.periodic(), None);
        for p in 0..3 {
            s.handle_wish(p, 2);
        }
        assert_eq!((s.view(), s.view_plus()), (2, 2));
        s.advance();
        assert_eq!(s.periodic(), Some(3));

        let mut s = SyncState::new(4, 1);
        s.handle_wish(0, 3);
        s.handle_wish(1, 3);
        assert_eq!((s.view(), s.view_plus(), s.advanced()), (0, 3, false));
        assert_eq!(s.periodic(), Some(3));
    }

    #[test]
    fn malformed_sender_ignored() {
        let mut s = SyncState::new(4, 1);
        assert_eq!(s.handle_wish(9, 5), WishOutcome::default());
        assert_eq!(s.max_views(), &[0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn compute_views_matches_oracle(f in 1usize..4, seed in prop::collection::vec(0u64..12, 13)) {
            let n = 3 * f + 1;
            let mv = &seed[..n];
            let (v, vp) = compute_views(mv, f);
            prop_assert_eq!(v, oracle(mv, 2 * f + 1));
            prop_assert_eq!(vp, oracle(mv, f + 1));
            prop_assert!(v <= vp);
        }

        #[test]
        fn state_stays_monotone(wishes in prop::collection::vec((0usize..4, 1u64..20, any::<bool>()), 1..60)) {
            let mut s = SyncState::new(4, 1);
            let mut entered = Vec::new();
            for (from, v, adv) in wishes {
                if adv { s.advance(); }
                let (pv, pp) = (s.view(), s.view_plus());
                let before = s.max_views().to_vec();
                let out = s.handle_wish(from, v);
                prop_assert!(s.view() <= s.view_plus());
                prop_assert!(s.view() >= pv && s.view_plus() >= pp);
                prop_assert!(s.max_views().iter().zip(&before).all(|(a, b)| a >= b));
                prop_assert_eq!(s.entries(), 4);
                prop_assert!(s.max_views().iter().filter(|&&m| m >= s.view()).count() >= 3);
                if let Some(e) = out.echo {
                    prop_assert_eq!(e, s.view_plus());
                }
                if let Some(nv) = out.new_view {
                    entered.push(nv);
                }
            }
            prop_assert!(entered.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
