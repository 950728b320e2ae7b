//! Simulation clock type.
//!
//! All instants and durations are integer microseconds. The latency budgets
//! this simulator works with are integral milliseconds, so microsecond
//! arithmetic is exact: component breakdowns sum to totals without rounding,
//! and paired differences between bearer options come out to the exact
//! configured establishment time. Sub-millisecond resolution also lets call
//! arrivals fall anywhere inside an MCCH modification period instead of on
//! whole-millisecond ticks, which keeps the mean control-channel wait at
//! half the period.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

/// An instant or duration on the simulation clock, in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_us(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime(secs * 1_000_000)
    }

    pub const fn as_us(self) -> u64 {
        self.0
    }

    /// Whole milliseconds, truncating.
    pub const fn as_ms(self) -> u64 {
        self.0 / 1_000
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl SubAssign for SimTime {
    fn sub_assign(&mut self, rhs: SimTime) {
        self.0 -= rhs.0;
    }
}

impl fmt::Display for SimTime {
    /// Renders the raw microsecond count; trace lines and CSV writers decide
    /// their own unit formatting.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
