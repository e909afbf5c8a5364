//! Consensus synchronizer built from the SMR synchronizer: views of growing
//! duration `F(v)`, with no `advance` input from above.

use crate::msg::SignedMsg;
use crate::node::{Ctx, Upper};
use crate::trace::{AdvanceCause, EventKind, TimerId};
use crate::{Pid, Time, View};

#[derive(Clone, Debug)]
pub struct ConsensusSync {
    /// `F(v) = v * slope`.
    slope: Time,
    started: bool,
    last_view: View,
}

impl ConsensusSync {
    pub fn new(slope: Time) -> Self {
        ConsensusSync { slope, started: false, last_view: 0 }
    }

    pub fn duration(&self, v: View) -> Time {
        v * self.slope
    }

    pub fn last_view(&self) -> View {
        self.last_view
    }
}

impl Upper for ConsensusSync {
    fn on_start(&mut self, cx: &mut Ctx<'_>) {
        // Processes that already got a notification do not start.
        if self.started || self.last_view > 0 {
            return;
        }
        self.started = true;
        cx.request_advance(AdvanceCause::Start);
    }

    fn on_new_view(&mut self, v: View, cx: &mut Ctx<'_>) {
        if v <= self.last_view {
            return;
        }
        self.last_view = v;
        cx.stop_timer(TimerId::View);
        cx.start_timer(TimerId::View, self.duration(v));
        cx.trace(EventKind::EnterConsensusView { v });
    }

    fn on_message(&mut self, _from: Pid, _msg: &SignedMsg, _cx: &mut Ctx<'_>) {}

    fn on_timer(&mut self, id: TimerId, cx: &mut Ctx<'_>) {
        if id == TimerId::View {
            cx.request_advance(AdvanceCause::Timer);
        }
    }
}
