use std::collections::VecDeque;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{FixedPoint, ProtocolError};

/// Half-width of the interval random shares are drawn from, in fixed-point
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct ShareBound(i32);

impl ShareBound {
    /// 10⁸ units, i.e. ±100 000 in real units.
    pub const DEFAULT: ShareBound = ShareBound(100_000_000);

    /// Zero is accepted: it makes every random share zero, which the privacy
    /// metrics flag as total leakage.
    pub fn new(units: i64) -> Result<Self, ProtocolError> {
        i32::try_from(units)
            .ok()
            .filter(|u| *u >= 0)
            .map(ShareBound)
            .ok_or(ProtocolError::InvalidBound(units))
    }

    pub fn units(self) -> i32 {
        self.0
    }
}

impl Default for ShareBound {
    fn default() -> Self {
        ShareBound::DEFAULT
    }
}

impl TryFrom<i64> for ShareBound {
    type Error = ProtocolError;

    fn try_from(units: i64) -> Result<Self, Self::Error> {
        ShareBound::new(units)
    }
}

impl From<ShareBound> for i64 {
    fn from(b: ShareBound) -> i64 {
        b.0 as i64
    }
}

/// Where the random shares come from.
pub trait ShareSource {
    fn draw(&mut self, bound: ShareBound) -> Result<FixedPoint, ProtocolError>;
}

/// Any RNG draws uniformly on `[-bound, bound]`.
impl<R: RngCore> ShareSource for R {
    fn draw(&mut self, bound: ShareBound) -> Result<FixedPoint, ProtocolError> {
        let b = bound.units();
        Ok(FixedPoint::from_raw(self.gen_range(-b..=b)))
    }
}

/// Replays a fixed list of shares in order, ignoring the bound. Lets tests
/// pin an exact split.
#[derive(Debug, Clone, Default)]
pub struct ScriptedShares {
    queue: VecDeque<FixedPoint>,
}

impl ScriptedShares {
    pub fn new(shares: impl IntoIterator<Item = FixedPoint>) -> Self {
        ScriptedShares {
            queue: shares.into_iter().collect(),
        }
    }

    pub fn from_reals(values: &[f64]) -> Result<Self, ProtocolError> {
        let shares = values
            .iter()
            .map(|&v| FixedPoint::from_real(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScriptedShares::new(shares))
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl ShareSource for ScriptedShares {
    fn draw(&mut self, _bound: ShareBound) -> Result<FixedPoint, ProtocolError> {
        self.queue.pop_front().ok_or(ProtocolError::SharesExhausted)
    }
}

/// Splits `masked` into `n_shares` additive shares.
///
/// The first `n_shares - 1` come from `source`; the last is the residual, so
/// the shares always sum to `masked` in the wrapping ring.
pub fn split_shares<S: ShareSource + ?Sized>(
    masked: FixedPoint,
    n_shares: usize,
    source: &mut S,
    bound: ShareBound,
) -> Result<Vec<FixedPoint>, ProtocolError> {
    if n_shares < 2 {
        return Err(ProtocolError::TooFewShares(n_shares));
    }
    let mut shares = Vec::with_capacity(n_shares);
    let mut residual = masked;
    for _ in 0..n_shares - 1 {
        let s = source.draw(bound)?;
        residual = residual - s;
        shares.push(s);
    }
    shares.push(residual);
    Ok(shares)
}
