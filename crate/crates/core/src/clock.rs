//! Drifting local clocks.
//!
//! Before GST a process clock runs at a constant rational rate relative to
//! real time; from GST on it runs at rate 1.

use serde::{Deserialize, Serialize};

use crate::Time;

/// Clock rate `num / den` local ticks per real tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u64, u64)", into = "(u64, u64)")]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub const ONE: Rate = Rate { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        Rate { num, den }
    }

    pub fn is_valid(&self) -> bool {
        self.num > 0 && self.den > 0
    }
}

impl From<(u64, u64)> for Rate {
    fn from((num, den): (u64, u64)) -> Self {
        Rate { num, den }
    }
}

impl From<Rate> for (u64, u64) {
    fn from(r: Rate) -> Self {
        (r.num, r.den)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LocalClock {
    rate: Rate,
    gst: Time,
}

impl LocalClock {
    pub fn new(rate: Rate, gst: Time) -> Self {
        assert!(rate.is_valid(), "clock rate must be positive");
        LocalClock { rate, gst }
    }

    fn scaled(&self, t: Time) -> Time {
        (t as u128 * self.rate.num as u128 / self.rate.den as u128) as Time
    }

    /// Local reading at real time `t`.
    pub fn local(&self, t: Time) -> Time {
        if t <= self.gst {
            self.scaled(t)
        } else {
            self.scaled(self.gst) + (t - self.gst)
        }
    }

    /// Smallest real time at which the local reading is at least `l`.
    pub fn real_at(&self, l: Time) -> Time {
        let at_gst = self.scaled(self.gst);
        if l <= at_gst {
            let num = l as u128 * self.rate.den as u128;
            let den = self.rate.num as u128;
            num.div_ceil(den) as Time
        } else {
            self.gst + (l - at_gst)
        }
    }

    /// Real time at which a timer of local duration `d` started at `now` fires.
    pub fn fire_time(&self, now: Time, d: Time) -> Time {
        self.real_at(self.local(now) + d).max(now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate() {
        let c = LocalClock::new(Rate::ONE, 100);
        for t in [0, 1, 50, 100, 101, 1000] {
            assert_eq!(c.local(t), t);
            assert_eq!(c.real_at(t), t);
        }
    }

    #[test]
    fn half_rate_before_gst() {
        let c = LocalClock::new(Rate::new(1, 2), 100);
        assert_eq!(c.local(100), 50);
        assert_eq!(c.local(107), 57);
    }

    #[test]
    fn double_rate_timer_fires_after_half_the_ticks() {
        let c = LocalClock::new(Rate::new(2, 1), 1000);
        assert_eq!(c.fire_time(10, 10), 15);
    }

    #[test]
    fn timer_spanning_gst() {
        // local(100) = 50; a 60-tick timer started at 90 (local 45) fires at local 105.
        let c = LocalClock::new(Rate::new(1, 2), 100);
        assert_eq!(c.fire_time(90, 60), 155);
        assert_eq!(c.local(155), 105);
    }
}
