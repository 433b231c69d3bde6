//! Integer picosecond time values on a cyclic gate period.
//!
//! Every time quantity in the simulator (gate positions, arrival times,
//! relative delays, search steps) is an integer number of picoseconds.
//! Positions live on a ring of one pulse period and are reduced modulo
//! the period at the point of use; durations and deltas are plain signed
//! values.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// A signed time value in picoseconds.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimePs(i64);

impl TimePs {
    pub const ZERO: TimePs = TimePs(0);

    pub const fn new(ps: i64) -> Self {
        TimePs(ps)
    }

    pub const fn ps(self) -> i64 {
        self.0
    }

    pub const fn abs(self) -> TimePs {
        TimePs(self.0.abs())
    }

    /// Reduce into `[0, period)`.
    pub fn rem_period(self, period: TimePs) -> TimePs {
        debug_assert!(period.0 > 0);
        TimePs(self.0.rem_euclid(period.0))
    }

    /// Circular distance to `other` on a ring of size `period`.
    ///
    /// The result is in `[0, period/2]` regardless of the operands' signs
    /// or magnitudes.
    pub fn circ_dist(self, other: TimePs, period: TimePs) -> TimePs {
        let d = (self.0 - other.0).rem_euclid(period.0);
        TimePs(d.min(period.0 - d))
    }

    /// Signed residue modulo `period`, mapped into `(-period/2, period/2]`.
    pub fn signed_residue(self, period: TimePs) -> TimePs {
        let d = self.0.rem_euclid(period.0);
        if 2 * d > period.0 {
            TimePs(d - period.0)
        } else {
            TimePs(d)
        }
    }
}

impl Add for TimePs {
    type Output = TimePs;
    fn add(self, rhs: TimePs) -> TimePs {
        TimePs(self.0 + rhs.0)
    }
}

impl AddAssign for TimePs {
    fn add_assign(&mut self, rhs: TimePs) {
        self.0 += rhs.0;
    }
}

impl Sub for TimePs {
    type Output = TimePs;
    fn sub(self, rhs: TimePs) -> TimePs {
        TimePs(self.0 - rhs.0)
    }
}

impl SubAssign for TimePs {
    fn sub_assign(&mut self, rhs: TimePs) {
        self.0 -= rhs.0;
    }
}

impl Neg for TimePs {
    type Output = TimePs;
    fn neg(self) -> TimePs {
        TimePs(-self.0)
    }
}

impl Mul<i64> for TimePs {
    type Output = TimePs;
    fn mul(self, rhs: i64) -> TimePs {
        TimePs(self.0 * rhs)
    }
}

impl From<i64> for TimePs {
    fn from(ps: i64) -> Self {
        TimePs(ps)
    }
}

impl fmt::Debug for TimePs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.0)
    }
}

impl fmt::Display for TimePs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ps", self.0)
    }
}
