//! Average-speed CO₂ cost model.
//!
//! A vehicle's emission rate at average speed `s` (km/h) is
//!
//! ```text
//! f(s) = k · (a + b·s + c·s² + d·s³ + e·s⁴ + f·s⁵ + g·s⁶) / s
//! ```
//!
//! in grams per km. Six built-in vehicle classes carry the published
//! coefficients; custom coefficients and tabulated curves are also supported
//! so that scenarios can model arbitrary (even non-convex) cost functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::VehicleId;

/// Default speed domain used throughout the experiments, km/h.
pub const DEFAULT_SPEED_RANGE: (f64, f64) = (5.0, 140.0);

/// Sampling step used when scanning the second derivative, km/h.
pub const GROWTH_SCAN_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmissionError {
    #[error("speed must be positive, got {0} km/h")]
    NonPositiveSpeed(f64),
    #[error("invalid speed grid: m={m}, range=[{lo}, {hi}]")]
    InvalidGrid { m: usize, lo: f64, hi: f64 },
    #[error(
        "cost function is not strictly convex on [{lo}, {hi}] (min second derivative {d_min})"
    )]
    NotStrictlyConvex {
        lo: f64,
        hi: f64,
        d_min: f64,
        d_max: f64,
    },
    #[error("speed {speed} km/h is outside the tabulated range [{lo}, {hi}]")]
    OutsideTable { speed: f64, lo: f64, hi: f64 },
    #[error("cost table must have at least one point with strictly increasing speeds")]
    InvalidTable,
    #[error("cost function has no analytic derivative")]
    NotDifferentiable,
}

/// Polynomial coefficients of the average-speed model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionFactors {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default)]
    pub e: f64,
    #[serde(default)]
    pub f: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(default = "unit_scale")]
    pub k: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl EmissionFactors {
    /// Cubic-numerator factors with `e = f = g = 0` and `k = 1`.
    pub const fn cubic(a: f64, b: f64, c: f64, d: f64) -> Self {
        EmissionFactors {
            a,
            b,
            c,
            d,
            e: 0.0,
            f: 0.0,
            g: 0.0,
            k: 1.0,
        }
    }

    pub fn rate(&self, speed: f64) -> Result<f64, EmissionError> {
        emission_rate(self, speed)
    }

    pub fn derivative(&self, speed: f64) -> Result<f64, EmissionError> {
        emission_derivative(self, speed)
    }
}

/// The six built-in vehicle classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    R004,
    R005,
    R011,
    R012,
    R018,
    R019,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 6] = [
        VehicleClass::R004,
        VehicleClass::R005,
        VehicleClass::R011,
        VehicleClass::R012,
        VehicleClass::R018,
        VehicleClass::R019,
    ];

    pub const fn factors(self) -> EmissionFactors {
        match self {
            VehicleClass::R004 => EmissionFactors::cubic(2.2606e3, 7.0183e1, 2.9263e-1, 3.0199e-3),
            VehicleClass::R005 => EmissionFactors::cubic(2.2606e3, 5.9444e1, 2.9263e-1, 3.0199e-3),
            VehicleClass::R011 => EmissionFactors::cubic(2.5324e3, 1.1834e2, -4.3167e-1, 6.6776e-3),
            VehicleClass::R012 => EmissionFactors::cubic(2.5324e3, 1.0340e2, -4.3167e-1, 6.6776e-3),
            VehicleClass::R018 => EmissionFactors::cubic(3.7473e3, 1.6774e2, -8.5270e-1, 1.0318e-2),
            VehicleClass::R019 => EmissionFactors::cubic(3.7473e3, 1.5599e2, -8.5270e-1, 1.0318e-2),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            VehicleClass::R004 => "R004",
            VehicleClass::R005 => "R005",
            VehicleClass::R011 => "R011",
            VehicleClass::R012 => "R012",
            VehicleClass::R018 => "R018",
            VehicleClass::R019 => "R019",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VehicleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VehicleClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown vehicle class `{s}`"))
    }
}

fn check_speed(speed: f64) -> Result<(), EmissionError> {
    if speed > 0.0 && speed.is_finite() {
        Ok(())
    } else {
        Err(EmissionError::NonPositiveSpeed(speed))
    }
}

/// Emission rate in grams/km at the given average speed.
pub fn emission_rate(factors: &EmissionFactors, speed: f64) -> Result<f64, EmissionError> {
    check_speed(speed)?;
    let EmissionFactors {
        a,
        b,
        c,
        d,
        e,
        f,
        g,
        k,
    } = *factors;
    let s = speed;
    // Horner on the numerator, then divide once.
    let numerator = a + s * (b + s * (c + s * (d + s * (e + s * (f + s * g)))));
    Ok(k * numerator / s)
}

/// Analytic first derivative of [`emission_rate`] with respect to speed.
pub fn emission_derivative(factors: &EmissionFactors, speed: f64) -> Result<f64, EmissionError> {
    check_speed(speed)?;
    let EmissionFactors {
        a,
        c,
        d,
        e,
        f,
        g,
        k,
        ..
    } = *factors;
    let s = speed;
    let poly = c + s * (2.0 * d + s * (3.0 * e + s * (4.0 * f + s * 5.0 * g)));
    Ok(k * (poly - a / (s * s)))
}

/// Analytic second derivative of [`emission_rate`].
pub fn emission_second_derivative(
    factors: &EmissionFactors,
    speed: f64,
) -> Result<f64, EmissionError> {
    check_speed(speed)?;
    let EmissionFactors {
        a, d, e, f, g, k, ..
    } = *factors;
    let s = speed;
    let poly = 2.0 * d + s * (6.0 * e + s * (12.0 * f + s * 20.0 * g));
    Ok(k * (poly + 2.0 * a / (s * s * s)))
}

/// Lower and upper bounds on the growth of the derivative over a speed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBounds {
    pub d_min: f64,
    pub d_max: f64,
}

/// Bounds on `f''` over `[lo, hi]`, scanned on a 0.1 km/h grid that always
/// includes both endpoints.
///
/// Fails with [`EmissionError::NotStrictlyConvex`] when the minimum is not
/// strictly positive; the error still carries the scanned values.
pub fn growth_bounds(
    factors: &EmissionFactors,
    lo: f64,
    hi: f64,
) -> Result<GrowthBounds, EmissionError> {
    check_speed(lo)?;
    if lo.is_nan() || !hi.is_finite() || hi <= lo {
        return Err(EmissionError::InvalidGrid { m: 0, lo, hi });
    }
    let steps = ((hi - lo) / GROWTH_SCAN_STEP).ceil() as usize;
    let mut d_min = f64::INFINITY;
    let mut d_max = f64::NEG_INFINITY;
    for i in 0..=steps {
        let s = (lo + i as f64 * GROWTH_SCAN_STEP).min(hi);
        let v = emission_second_derivative(factors, s)?;
        d_min = d_min.min(v);
        d_max = d_max.max(v);
    }
    if d_min > 0.0 {
        Ok(GrowthBounds { d_min, d_max })
    } else {
        Err(EmissionError::NotStrictlyConvex {
            lo,
            hi,
            d_min,
            d_max,
        })
    }
}

/// Uniformly spaced speeds in `[lo, hi]`, both ends included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedGrid {
    lo: f64,
    hi: f64,
    speeds: Vec<f64>,
}

impl SpeedGrid {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn speed(&self, index: usize) -> Option<f64> {
        self.speeds.get(index).copied()
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.speeds.len() - 1) as f64
    }
}

pub fn build_speed_grid(m: usize, lo: f64, hi: f64) -> Result<SpeedGrid, EmissionError> {
    if m < 2 || lo.is_nan() || lo <= 0.0 || !hi.is_finite() || lo >= hi {
        return Err(EmissionError::InvalidGrid { m, lo, hi });
    }
    let step = (hi - lo) / (m - 1) as f64;
    let mut speeds: Vec<f64> = (0..m).map(|j| lo + j as f64 * step).collect();
    // Pin the last point so it is exactly `hi` regardless of rounding.
    speeds[m - 1] = hi;
    Ok(SpeedGrid { lo, hi, speeds })
}

/// How a vehicle's private cost is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    Polynomial(EmissionFactors),
    /// Piecewise-linear interpolation through `(speed, cost)` points.
    Table(Vec<(f64, f64)>),
    /// Always zero; used by the base-station dummy participant.
    Zero,
}

impl CostModel {
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self, EmissionError> {
        let increasing = points.windows(2).all(|w| w[0].0 < w[1].0);
        if points.is_empty()
            || !increasing
            || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite())
        {
            return Err(EmissionError::InvalidTable);
        }
        Ok(CostModel::Table(points))
    }

    pub fn cost(&self, speed: f64) -> Result<f64, EmissionError> {
        match self {
            CostModel::Polynomial(factors) => emission_rate(factors, speed),
            CostModel::Table(points) => interpolate(points, speed),
            CostModel::Zero => Ok(0.0),
        }
    }

    pub fn derivative(&self, speed: f64) -> Result<f64, EmissionError> {
        match self {
            CostModel::Polynomial(factors) => emission_derivative(factors, speed),
            CostModel::Zero => Ok(0.0),
            CostModel::Table(_) => Err(EmissionError::NotDifferentiable),
        }
    }

    pub fn factors(&self) -> Option<&EmissionFactors> {
        match self {
            CostModel::Polynomial(factors) => Some(factors),
            _ => None,
        }
    }
}

fn interpolate(points: &[(f64, f64)], speed: f64) -> Result<f64, EmissionError> {
    let (lo, hi) = (points[0].0, points[points.len() - 1].0);
    const EPS: f64 = 1e-9;
    if speed < lo - EPS || speed > hi + EPS {
        return Err(EmissionError::OutsideTable { speed, lo, hi });
    }
    if let Some(&(_, v)) = points.iter().find(|(s, _)| (s - speed).abs() <= EPS) {
        return Ok(v);
    }
    let upper = points.partition_point(|(s, _)| *s < speed);
    let (s0, v0) = points[upper - 1];
    let (s1, v1) = points[upper];
    Ok(v0 + (v1 - v0) * (speed - s0) / (s1 - s0))
}

/// A fleet member: identifier plus private cost model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub cost: CostModel,
}

impl Vehicle {
    pub fn new(id: impl Into<VehicleId>, cost: CostModel) -> Self {
        Vehicle {
            id: id.into(),
            cost,
        }
    }

    pub fn of_class(id: impl Into<VehicleId>, class: VehicleClass) -> Self {
        Vehicle::new(id, CostModel::Polynomial(class.factors()))
    }

    pub fn dummy() -> Self {
        Vehicle {
            id: VehicleId::DUMMY,
            cost: CostModel::Zero,
        }
    }

    pub fn is_dummy(&self) -> bool {
        self.id == VehicleId::DUMMY
    }
}

/// Sum of all fleet costs at one speed, in ascending fleet order.
pub fn total_cost(fleet: &[Vehicle], speed: f64) -> Result<f64, EmissionError> {
    fleet
        .iter()
        .try_fold(0.0, |acc, v| Ok(acc + v.cost.cost(speed)?))
}
