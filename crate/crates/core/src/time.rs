//! Fixed-point simulation time with microsecond resolution.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

const MICROS_PER_SEC: u64 = 1_000_000;

/// A point in simulated time, counted in whole microseconds since the start
/// of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * MICROS_PER_SEC)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Converts floating seconds, rounding to the nearest microsecond.
    /// Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if !(s > 0.0) {
            return SimTime::ZERO;
        }
        let us = (s * MICROS_PER_SEC as f64).round();
        if us >= u64::MAX as f64 {
            SimTime::MAX
        } else {
            SimTime(us as u64)
        }
    }

    /// Like [`SimTime::from_secs_f64`] but rounds up, so a motion that takes
    /// `s` seconds never completes early.
    pub fn from_secs_f64_ceil(s: f64) -> Self {
        if !(s > 0.0) {
            return SimTime::ZERO;
        }
        let us = (s * MICROS_PER_SEC as f64 - 1e-6).ceil();
        if us >= u64::MAX as f64 {
            SimTime::MAX
        } else {
            SimTime(us.max(0.0) as u64)
        }
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    pub fn checked_sub(self, other: SimTime) -> Option<SimTime> {
        self.0.checked_sub(other.0).map(SimTime)
    }

    /// Parses the exact `seconds.micros` form produced by `Display`.
    pub fn parse_exact(s: &str) -> Option<SimTime> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if frac.len() > 6 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let secs: u64 = whole.parse().ok()?;
        let mut micros = 0u64;
        if !frac.is_empty() {
            micros = frac.parse::<u64>().ok()? * 10u64.pow(6 - frac.len() as u32);
        }
        secs.checked_mul(MICROS_PER_SEC)?.checked_add(micros).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("SimTime subtraction underflow"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / MICROS_PER_SEC, self.0 % MICROS_PER_SEC)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trips() {
        for us in [0u64, 1, 999_999, 1_000_000, 40_123_456, u64::MAX / 2] {
            let t = SimTime::from_micros(us);
            assert_eq!(SimTime::parse_exact(&t.to_string()), Some(t));
        }
        assert_eq!(SimTime::parse_exact("1.5"), Some(SimTime::from_millis(1500)));
        assert_eq!(SimTime::parse_exact("1.1234567"), None);
    }

    #[test]
    fn float_conversion_clamps() {
        assert_eq!(SimTime::from_secs_f64(-3.0), SimTime::ZERO);
        assert_eq!(SimTime::from_secs_f64(f64::NAN), SimTime::ZERO);
        assert_eq!(SimTime::from_secs_f64(2.0), SimTime::from_secs(2));
        assert_eq!(SimTime::from_secs_f64_ceil(2.0), SimTime::from_secs(2));
        assert_eq!(SimTime::from_secs_f64_ceil(2.0000001), SimTime::from_micros(2_000_001));
    }
}
