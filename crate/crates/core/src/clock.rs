//! Simulated time in integer microseconds.
//!
//! Every period used by the lab (10 ms physics, 59 ms vision, 100 ms state
//! push, 200 ms tick, 250 ms link delay) is a whole number of milliseconds, so
//! an integer clock keeps boundary arithmetic exact.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Rounds to the nearest microsecond; negative inputs saturate at zero.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e6).round().max(0.0) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    /// True when this instant is a whole multiple of `period`.
    pub fn is_multiple_of(self, period: SimTime) -> bool {
        period.0 != 0 && self.0 % period.0 == 0
    }

    /// Smallest multiple of `period` strictly after `self`.
    pub fn next_multiple_after(self, period: SimTime) -> SimTime {
        SimTime((self.0 / period.0 + 1) * period.0)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_multiple_is_strict() {
        let p = SimTime::from_millis(59);
        assert_eq!(SimTime::ZERO.next_multiple_after(p), p);
        assert_eq!(p.next_multiple_after(p), SimTime::from_millis(118));
        assert_eq!(SimTime::from_millis(60).next_multiple_after(p), SimTime::from_millis(118));
    }

    #[test]
    fn seconds_roundtrip() {
        assert_eq!(SimTime::from_secs_f64(0.25), SimTime::from_millis(250));
        assert_eq!(SimTime::from_millis(200).as_secs_f64(), 0.2);
        assert_eq!(SimTime::from_millis(1234).to_string(), "1.234000s");
    }
}
