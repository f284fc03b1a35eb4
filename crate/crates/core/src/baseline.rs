//! Iterative derivative-feedback consensus (the scheme the protocol
//! replaces).
//!
//! Each step mixes neighbour speeds through a row-stochastic matrix and
//! pushes every vehicle by the same amount, `mu` times the sum of all cost
//! derivatives:
//!
//! ```text
//! s(k+1) = P(k)·s(k) − mu · Σᵢ f′ᵢ(sᵢ(k)) · 𝟙
//! ```
//!
//! Iterates are clamped to the configured speed range so that `f′` stays
//! defined. Stability needs `0 < mu < 2 / Σᵢ d_maxᵢ`, where `d_maxᵢ` bounds
//! the growth of `f′ᵢ`.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::emissions::{growth_bounds, EmissionError, Vehicle};
use crate::graph::{row_stochastic_from_graph, GraphSequence, StochasticMatrix};
use crate::oracle::{brute_force_optimum, DEFAULT_RESOLUTION};
use crate::VehicleId;

/// Fraction of the stability bound used when no `mu` is given.
pub const DEFAULT_MU_FRACTION: f64 = 0.9;
pub const DEFAULT_TOL_CONSENSUS: f64 = 0.01;
pub const DEFAULT_TOL_GRADIENT: f64 = 0.01;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("baseline inapplicable: cost of vehicle {vehicle} is not strictly convex ({source})")]
    NotConvex {
        vehicle: VehicleId,
        source: EmissionError,
    },
    #[error("vehicle {0} has no analytic cost derivative")]
    NotDifferentiable(VehicleId),
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Cost(#[from] EmissionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpConfig {
    pub mu: f64,
    pub tol_consensus: f64,
    pub tol_gradient: f64,
    pub max_iter: usize,
    pub lo: f64,
    pub hi: f64,
}

impl DpConfig {
    /// Defaults with `mu` at 90% of the stability bound for `fleet`.
    pub fn for_fleet(fleet: &[Vehicle], lo: f64, hi: f64) -> Result<Self, BaselineError> {
        let mu = DEFAULT_MU_FRACTION * mu_upper_bound(fleet, lo, hi)?;
        Ok(DpConfig {
            mu,
            tol_consensus: DEFAULT_TOL_CONSENSUS,
            tol_gradient: DEFAULT_TOL_GRADIENT,
            max_iter: DEFAULT_MAX_ITER,
            lo,
            hi,
        })
    }

    fn validate(&self) -> Result<(), BaselineError> {
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(BaselineError::InvalidConfig(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.tol_consensus > 0.0 && self.tol_gradient > 0.0) {
            return Err(BaselineError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.lo > 0.0 && self.lo < self.hi) {
            return Err(BaselineError::InvalidConfig(format!(
                "bad speed range [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpState {
    pub k: usize,
    pub s: Vec<f64>,
}

impl DpState {
    pub fn mean(&self) -> f64 {
        self.s.iter().sum::<f64>() / self.s.len() as f64
    }

    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    }
}

/// `2 / Σᵢ d_maxᵢ` over `[lo, hi]`.
pub fn mu_upper_bound(fleet: &[Vehicle], lo: f64, hi: f64) -> Result<f64, BaselineError> {
    if fleet.is_empty() {
        return Err(BaselineError::InvalidConfig("empty fleet".into()));
    }
    let mut total = 0.0;
    for v in fleet {
        let factors = v
            .cost
            .factors()
            .ok_or(BaselineError::NotDifferentiable(v.id))?;
        let bounds = growth_bounds(factors, lo, hi).map_err(|source| BaselineError::NotConvex {
            vehicle: v.id,
            source,
        })?;
        total += bounds.d_max;
    }
    Ok(2.0 / total)
}

/// `Σᵢ f′ᵢ(s)`: zero exactly at the consensus optimum.
pub fn gradient_sum(fleet: &[Vehicle], s: f64) -> Result<f64, BaselineError> {
    fleet
        .iter()
        .try_fold(0.0, |acc, v| Ok(acc + derivative(v, s)?))
}

fn derivative(v: &Vehicle, s: f64) -> Result<f64, BaselineError> {
    v.cost.derivative(s).map_err(|e| match e {
        EmissionError::NotDifferentiable => BaselineError::NotDifferentiable(v.id),
        other => other.into(),
    })
}

/// One feedback step. `fleet[i]` owns `state.s[i]` and row/column `i` of `p`.
pub fn dp_step(
    state: &DpState,
    p: &StochasticMatrix,
    fleet: &[Vehicle],
    mu: f64,
    lo: f64,
    hi: f64,
) -> Result<DpState, BaselineError> {
    let n = state.s.len();
    if p.dim() != n || fleet.len() != n {
        return Err(BaselineError::Dimension(format!(
            "state {n}, matrix {}, fleet {}",
            p.dim(),
            fleet.len()
        )));
    }
    // Fixed ascending order keeps the scalar sum reproducible.
    let mut push = 0.0;
    for (v, &s) in fleet.iter().zip(&state.s) {
        push += derivative(v, s)?;
    }
    let s = p
        .mul_vec(&state.s)
        .into_iter()
        .map(|x| (x - mu * push).clamp(lo, hi))
        .collect();
    Ok(DpState { k: state.k + 1, s })
}

/// Every vehicle starts at its own optimum on a fine grid.
pub fn initial_speeds(fleet: &[Vehicle], lo: f64, hi: f64) -> Result<Vec<f64>, BaselineError> {
    fleet
        .iter()
        .map(|v| {
            Ok(brute_force_optimum(std::slice::from_ref(v), lo, hi, DEFAULT_RESOLUTION)?.s_star)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpOutcome {
    pub s_final: Vec<f64>,
    /// Mean of the final speeds.
    pub consensus: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|Σᵢ f′ᵢ(s̄(k))|` for every visited state, starting at `k = 0`.
    pub residual_history: Vec<f64>,
    /// Speeds at every visited state.
    pub trace: Vec<Vec<f64>>,
}

impl DpOutcome {
    /// CSV with columns `iteration, s_<id>..., residual`.
    pub fn write_trace_csv<W: Write>(&self, ids: &[VehicleId], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string()];
        header.extend(ids.iter().map(|id| format!("s_{id}_kmh")));
        header.push("residual".into());
        w.write_record(&header)?;
        for (k, (s, r)) in self.trace.iter().zip(&self.residual_history).enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(s.iter().map(|x| x.to_string()));
            row.push(r.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterates until the speeds agree within `tol_consensus` and the gradient
/// sum at their mean is below `tol_gradient`, or `max_iter` steps pass.
/// Round `k` mixes with the graph `graphs.at(k)`, whose vertices must be the
/// fleet's ids. Running out of iterations is reported, not raised.
pub fn run_dp(
    fleet: &[Vehicle],
    graphs: &GraphSequence,
    config: &DpConfig,
    s0: &[f64],
) -> Result<DpOutcome, BaselineError> {
    config.validate()?;
    if graphs.is_empty() {
        return Err(BaselineError::InvalidConfig("empty graph sequence".into()));
    }
    let mut fleet = fleet.to_vec();
    let mut s0: Vec<(VehicleId, f64)> =
        fleet.iter().map(|v| v.id).zip(s0.iter().copied()).collect();
    if s0.len() != fleet.len() {
        return Err(BaselineError::Dimension(format!(
            "{} initial speeds for {} vehicles",
            s0.len(),
            fleet.len()
        )));
    }
    fleet.sort_by_key(|v| v.id);
    s0.sort_by_key(|(id, _)| *id);
    for g in graphs.graphs() {
        if !g.vertices().eq(fleet.iter().map(|v| v.id)) {
            return Err(BaselineError::Dimension(
                "graph vertices differ from fleet".into(),
            ));
        }
    }

    let mut state = DpState {
        k: 0,
        s: s0
            .into_iter()
            .map(|(_, s)| s.clamp(config.lo, config.hi))
            .collect(),
    };
    let mut residual_history = Vec::new();
    let mut trace = Vec::new();
    loop {
        let residual = gradient_sum(&fleet, state.mean())?.abs();
        residual_history.push(residual);
        trace.push(state.s.clone());
        if state.spread() < config.tol_consensus && residual < config.tol_gradient {
            return Ok(finish(state, true, residual_history, trace));
        }
        if state.k >= config.max_iter {
            return Ok(finish(state, false, residual_history, trace));
        }
        let p = row_stochastic_from_graph(graphs.at(state.k));
        state = dp_step(&state, &p, &fleet, config.mu, config.lo, config.hi)?;
    }
}

fn finish(
    state: DpState,
    converged: bool,
    residual_history: Vec<f64>,
    trace: Vec<Vec<f64>>,
) -> DpOutcome {
    DpOutcome {
        consensus: state.mean(),
        iterations: state.k,
        converged,
        s_final: state.s,
        residual_history,
        trace,
    }
}
