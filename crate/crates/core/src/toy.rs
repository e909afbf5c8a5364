//! Minimal synchronizer client: spend `tau` in each view, then ask to move on.

use crate::msg::SignedMsg;
use crate::node::{Ctx, Upper};
use crate::trace::{AdvanceCause, TimerId};
use crate::{Pid, Time, View};

#[derive(Clone, Debug)]
pub struct ToyClient {
    tau: Time,
}

impl ToyClient {
    pub fn new(tau: Time) -> Self {
        ToyClient { tau }
    }
}

impl Upper for ToyClient {
    fn on_start(&mut self, cx: &mut Ctx<'_>) {
        cx.request_advance(AdvanceCause::Start);
    }

    fn on_new_view(&mut self, _v: View, cx: &mut Ctx<'_>) {
        cx.stop_timer(TimerId::Toy);
        cx.start_timer(TimerId::Toy, self.tau);
    }

    fn on_message(&mut self, _from: Pid, _msg: &SignedMsg, _cx: &mut Ctx<'_>) {}

    fn on_timer(&mut self, id: TimerId, cx: &mut Ctx<'_>) {
        if id == TimerId::Toy {
            cx.request_advance(AdvanceCause::Timer);
        }
    }
}
