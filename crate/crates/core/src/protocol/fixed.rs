use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::Serialize;

use super::ProtocolError;

/// Fixed-point scale: one real unit is 1000 integer units.
pub const SCALE: i32 = 1000;

/// A value in thousandths, carried as a 32-bit integer.
///
/// Arithmetic wraps modulo 2³², which is the ring the additive shares live
/// in: any set of shares sums back to the secret exactly, however large the
/// individual shares are. Only values produced by [`FixedPoint::from_real`]
/// are range checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct FixedPoint(i32);

impl FixedPoint {
    pub const ZERO: FixedPoint = FixedPoint(0);

    pub const fn from_raw(raw: i32) -> Self {
        FixedPoint(raw)
    }

    pub const fn raw(self) -> i32 {
        self.0
    }

    /// Rounds half away from zero. Values whose magnitude reaches 2³¹ units
    /// are rejected.
    pub fn from_real(value: f64) -> Result<Self, ProtocolError> {
        let scaled = (value * SCALE as f64).round();
        if !scaled.is_finite() || scaled.abs() >= 2f64.powi(31) {
            return Err(ProtocolError::Encoding { value });
        }
        Ok(FixedPoint(scaled as i32))
    }

    pub fn to_real(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }
}

impl Add for FixedPoint {
    type Output = FixedPoint;

    fn add(self, rhs: FixedPoint) -> FixedPoint {
        FixedPoint(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for FixedPoint {
    fn add_assign(&mut self, rhs: FixedPoint) {
        *self = *self + rhs;
    }
}

impl Sub for FixedPoint {
    type Output = FixedPoint;

    fn sub(self, rhs: FixedPoint) -> FixedPoint {
        FixedPoint(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for FixedPoint {
    type Output = FixedPoint;

    fn neg(self) -> FixedPoint {
        FixedPoint(self.0.wrapping_neg())
    }
}

impl Sum for FixedPoint {
    fn sum<I: Iterator<Item = FixedPoint>>(iter: I) -> FixedPoint {
        iter.fold(FixedPoint::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a FixedPoint> for FixedPoint {
    fn sum<I: Iterator<Item = &'a FixedPoint>>(iter: I) -> FixedPoint {
        iter.copied().sum()
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:03}", abs / SCALE as u32, abs % SCALE as u32)
    }
}
