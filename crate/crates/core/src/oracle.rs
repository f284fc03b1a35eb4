//! Ground truth for the consensus problem: the speed minimising the fleet's
//! total cost, found by exhaustive evaluation on a fine grid.

use serde::Serialize;

use crate::emissions::{total_cost, EmissionError, Vehicle};

pub const DEFAULT_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    pub s_star: f64,
    pub f_star: f64,
    pub resolution: f64,
}

/// Evaluates the total cost at `lo + i·resolution` for every `i` that stays
/// within `[lo, hi]` and returns the minimiser (lowest speed on ties).
pub fn brute_force_optimum(
    fleet: &[Vehicle],
    lo: f64,
    hi: f64,
    resolution: f64,
) -> Result<OracleResult, EmissionError> {
    if resolution.is_nan() || resolution <= 0.0 || lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(EmissionError::InvalidGrid { m: 0, lo, hi });
    }
    // Small tolerance so that `hi` itself is included despite rounding.
    let steps = ((hi - lo) / resolution + 1e-9).floor() as usize;
    let mut best = OracleResult {
        s_star: lo,
        f_star: f64::INFINITY,
        resolution,
    };
    for i in 0..=steps {
        let s = lo + i as f64 * resolution;
        let f = total_cost(fleet, s)?;
        if f < best.f_star {
            best.s_star = s;
            best.f_star = f;
        }
    }
    Ok(best)
}

/// `F(s*) / F(recommended)`: 1 at the optimum, smaller the worse the
/// recommendation.
pub fn accuracy(
    recommended: f64,
    fleet: &[Vehicle],
    oracle: &OracleResult,
) -> Result<f64, EmissionError> {
    let at_recommended = total_cost(fleet, recommended)?;
    Ok(oracle.f_star / at_recommended)
}
