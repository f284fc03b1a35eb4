//! Scenario configuration and orchestration.
//!
//! A scenario is a fleet, a topology generator, a speed grid, the masking
//! map, a share bound, a seed and a number of rounds. Membership events
//! take effect at round boundaries. Every round runs one protocol round
//! over the active vehicles, routing any vehicle without an out-neighbor
//! through a zero-cost dummy participant hosted by the base station.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{self, BaselineError, DpConfig, DpOutcome};
use crate::emissions::{
    build_speed_grid, total_cost, CostModel, EmissionError, EmissionFactors, SpeedGrid, Vehicle,
    VehicleClass,
};
use crate::graph::{
    generate_switching_sequence, ring_over, validate_privacy_precondition, CommGraph, GraphError,
    GraphSequence,
};
use crate::metrics::{PrivacyReport, TrafficReport};
use crate::oracle::{self, OracleResult, DEFAULT_RESOLUTION};
use crate::protocol::{run_round, FixedPoint, MaskingParams, ProtocolError, ShareBound};
use crate::VehicleId;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Emission(#[from] EmissionError),
    #[error("round {round} failed: {reason}")]
    RoundFailed { round: usize, reason: String },
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub m: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
}

fn default_lo() -> f64 {
    crate::emissions::DEFAULT_SPEED_RANGE.0
}

fn default_hi() -> f64 {
    crate::emissions::DEFAULT_SPEED_RANGE.1
}

/// One explicitly listed vehicle; exactly one of `class`, `factors` or
/// `table` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<EmissionFactors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    /// Inactive vehicles only take part after a join event.
    #[serde(default = "yes")]
    pub active: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    /// Vehicles per built-in class. Ids are assigned from 1 upwards in class
    /// order (R004 first).
    #[serde(default)]
    pub per_class: BTreeMap<String, usize>,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    /// Ring over the active vehicles in ascending id order.
    #[default]
    Ring,
    /// Fresh switching sequence; any `window` consecutive rounds are jointly
    /// strongly connected.
    Switching { window: usize },
    /// Fixed edge list; each round uses the subgraph of active vehicles.
    Explicit { edges: Vec<(u32, u32)> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipEvent {
    pub round: usize,
    #[serde(default)]
    pub join: Vec<u32>,
    #[serde(default)]
    pub leave: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    #[serde(default = "default_mu_fraction")]
    pub mu_fraction: f64,
    #[serde(default = "default_tol_consensus")]
    pub tol_consensus: f64,
    #[serde(default = "default_tol_gradient")]
    pub tol_gradient: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_mu_fraction() -> f64 {
    baseline::DEFAULT_MU_FRACTION
}
fn default_tol_consensus() -> f64 {
    baseline::DEFAULT_TOL_CONSENSUS
}
fn default_tol_gradient() -> f64 {
    baseline::DEFAULT_TOL_GRADIENT
}
fn default_max_iter() -> usize {
    baseline::DEFAULT_MAX_ITER
}

impl Default for BaselineSpec {
    fn default() -> Self {
        BaselineSpec {
            mu_fraction: default_mu_fraction(),
            tol_consensus: default_tol_consensus(),
            tol_gradient: default_tol_gradient(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub rounds: usize,
    #[serde(default)]
    pub share_bound: ShareBound,
    pub grid: GridSpec,
    #[serde(default)]
    pub masking: MaskingParams,
    pub fleet: FleetSpec,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub events: Vec<MembershipEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSpec>,
}

fn one() -> usize {
    1
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        ScenarioConfig::from_toml_str(&text)
    }

    pub fn grid(&self) -> Result<SpeedGrid, HarnessError> {
        build_speed_grid(self.grid.m, self.grid.lo, self.grid.hi)
            .map_err(|e| config_err(format!("grid: {e}")))
    }

    /// Every vehicle the scenario knows about, in ascending id order, and
    /// the subset active at round 0.
    pub fn build_fleet(&self) -> Result<(Vec<Vehicle>, BTreeSet<VehicleId>), HarnessError> {
        let mut fleet: BTreeMap<VehicleId, Vehicle> = BTreeMap::new();
        let mut active = BTreeSet::new();
        for name in self.fleet.per_class.keys() {
            name.parse::<VehicleClass>().map_err(config_err)?;
        }
        let mut next = 1u32;
        for class in VehicleClass::ALL {
            let count = self
                .fleet
                .per_class
                .iter()
                .filter(|(k, _)| k.parse::<VehicleClass>().ok() == Some(class))
                .map(|(_, &c)| c)
                .sum::<usize>();
            for _ in 0..count {
                let id = VehicleId(next);
                next += 1;
                fleet.insert(id, Vehicle::of_class(id, class));
                active.insert(id);
            }
        }
        for spec in &self.fleet.vehicles {
            let id = VehicleId(spec.id);
            if id == VehicleId::DUMMY {
                return Err(config_err(format!("vehicle id {} is reserved", spec.id)));
            }
            if fleet.contains_key(&id) {
                return Err(config_err(format!("duplicate vehicle id {id}")));
            }
            let cost = match (&spec.class, &spec.factors, &spec.table) {
                (Some(class), None, None) => CostModel::Polynomial(
                    class.parse::<VehicleClass>().map_err(config_err)?.factors(),
                ),
                (None, Some(factors), None) => CostModel::Polynomial(*factors),
                (None, None, Some(table)) => CostModel::table(table.clone())
                    .map_err(|e| config_err(format!("vehicle {id}: {e}")))?,
                _ => {
                    return Err(config_err(format!(
                        "vehicle {id}: give exactly one of `class`, `factors` or `table`"
                    )))
                }
            };
            fleet.insert(id, Vehicle::new(id, cost));
            if spec.active {
                active.insert(id);
            }
        }
        if fleet.is_empty() {
            return Err(config_err("fleet is empty"));
        }
        Ok((fleet.into_values().collect(), active))
    }

    /// Checks every field and replays the membership events.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.masking
            .validate()
            .map_err(|e| config_err(format!("masking: {e}")))?;
        self.grid()?;
        let (fleet, mut active) = self.build_fleet()?;
        let known: BTreeSet<VehicleId> = fleet.iter().map(|v| v.id).collect();
        match &self.topology {
            TopologySpec::Ring => {}
            TopologySpec::Switching { window } if *window == 0 => {
                return Err(config_err("switching window must be at least 1"));
            }
            TopologySpec::Switching { .. } => {}
            TopologySpec::Explicit { edges } => {
                CommGraph::new(
                    known.iter().copied(),
                    edges.iter().map(|&(u, v)| (VehicleId(u), VehicleId(v))),
                )
                .map_err(|e| config_err(format!("topology: {e}")))?;
            }
        }
        for round in 0..self.rounds {
            for event in self.events.iter().filter(|e| e.round == round) {
                apply_event(event, &known, &mut active)?;
            }
        }
        if let Some(event) = self.events.iter().find(|e| e.round >= self.rounds) {
            log::warn!("membership event at round {} is never reached", event.round);
        }
        Ok(())
    }
}

fn apply_event(
    event: &MembershipEvent,
    known: &BTreeSet<VehicleId>,
    active: &mut BTreeSet<VehicleId>,
) -> Result<(), HarnessError> {
    for &id in &event.leave {
        if !active.remove(&VehicleId(id)) {
            return Err(config_err(format!(
                "round {}: vehicle {id} cannot leave, it is not active",
                event.round
            )));
        }
    }
    for &id in &event.join {
        let id = VehicleId(id);
        if !known.contains(&id) {
            return Err(config_err(format!(
                "round {}: unknown vehicle {id} cannot join",
                event.round
            )));
        }
        if !active.insert(id) {
            return Err(config_err(format!(
                "round {}: vehicle {id} is already active",
                event.round
            )));
        }
    }
    Ok(())
}

/// Adds the base-station dummy (if absent) and the edge `weak -> dummy`.
/// A vehicle that already has an out-neighbor is left alone.
pub fn attach_dummy_vehicle(g: &CommGraph, weak: VehicleId) -> Result<CommGraph, GraphError> {
    if g.outdegree(weak)? > 0 {
        log::warn!("vehicle {weak} already has an out-neighbor, no dummy attached");
        return Ok(g.clone());
    }
    let vertex = (!g.contains(VehicleId::DUMMY)).then_some(VehicleId::DUMMY);
    g.extended(vertex, [(weak, VehicleId::DUMMY)])
}

/// Oracle results keyed by the participating vehicle set.
#[derive(Debug, Default)]
pub struct OracleCache {
    results: BTreeMap<Vec<VehicleId>, OracleResult>,
}

impl OracleCache {
    pub fn get(
        &mut self,
        fleet: &[Vehicle],
        lo: f64,
        hi: f64,
    ) -> Result<OracleResult, HarnessError> {
        let key: Vec<VehicleId> = fleet.iter().map(|v| v.id).collect();
        if let Some(r) = self.results.get(&key) {
            return Ok(*r);
        }
        let r = oracle::brute_force_optimum(fleet, lo, hi, DEFAULT_RESOLUTION)?;
        self.results.insert(key, r);
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub recommended_index: usize,
    pub recommended_speed: f64,
    /// Base-station curve in fixed-point units.
    pub base_curve: Vec<FixedPoint>,
    /// True fleet total per grid point, g/km.
    pub true_total: Vec<f64>,
    /// Grid index minimising the true total.
    pub true_grid_argmin: usize,
    pub oracle: OracleResult,
    pub accuracy: f64,
    pub privacy: PrivacyReport,
    pub traffic: TrafficReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub active: Vec<VehicleId>,
    /// Vehicles routed through the dummy this round.
    pub dummy_for: Vec<VehicleId>,
    /// Vehicles whose tables entered the base-station sum (dummy excluded).
    pub contributors: Vec<VehicleId>,
    pub graph: CommGraph,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<RoundSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineComparison {
    pub protocol_rounds: usize,
    pub protocol_speed: f64,
    pub dp_iterations: usize,
    pub dp_converged: bool,
    pub dp_speed: f64,
    pub gap_kmh: f64,
    pub oracle_speed: f64,
    pub mu: f64,
    pub mu_upper_bound: f64,
    pub final_residual: f64,
    pub fleet: Vec<VehicleId>,
    #[serde(skip)]
    pub outcome: DpOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub masking: MaskingParams,
    pub grid: Vec<f64>,
    pub rounds: Vec<RoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineComparison>,
}

impl ScenarioReport {
    pub fn failed_rounds(&self) -> impl Iterator<Item = &RoundReport> {
        self.rounds.iter().filter(|r| r.failure.is_some())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Cycle length of switching sequences used by the baseline.
const BASELINE_SEQUENCE_LEN: usize = 512;

struct TopologyBuilder<'a> {
    spec: &'a TopologySpec,
    seed: u64,
    rounds: usize,
    switching: BTreeMap<usize, GraphSequence>,
}

impl<'a> TopologyBuilder<'a> {
    fn new(spec: &'a TopologySpec, seed: u64, rounds: usize) -> Self {
        TopologyBuilder {
            spec,
            seed,
            rounds,
            switching: BTreeMap::new(),
        }
    }

    fn round_graph(
        &mut self,
        active: &[VehicleId],
        round: usize,
    ) -> Result<CommGraph, HarnessError> {
        if active.len() < 2 {
            return Ok(CommGraph::new(active.iter().copied(), [])?);
        }
        match self.spec {
            TopologySpec::Ring => Ok(ring_over(active)?),
            TopologySpec::Switching { window } => {
                let n = active.len();
                let (seed, rounds, window) = (self.seed, self.rounds, *window);
                let seq = match self.switching.entry(n) {
                    std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(generate_switching_sequence(n, rounds.max(1), window, seed)?)
                    }
                };
                // Generated over 1..=n; map position i to the i-th active id.
                Ok(seq.at(round).relabel(|v| active[v.0 as usize - 1])?)
            }
            TopologySpec::Explicit { edges } => {
                let all: BTreeSet<VehicleId> = edges
                    .iter()
                    .flat_map(|&(u, v)| [VehicleId(u), VehicleId(v)])
                    .chain(active.iter().copied())
                    .collect();
                let g = CommGraph::new(
                    all,
                    edges.iter().map(|&(u, v)| (VehicleId(u), VehicleId(v))),
                )?;
                Ok(g.induced(&active.iter().copied().collect()))
            }
        }
    }
}

/// Runs every round of the scenario. Round-level failures are recorded in
/// the report; only configuration problems abort.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport, HarnessError> {
    run_scenario_with(config, &mut OracleCache::default())
}

pub fn run_scenario_with(
    config: &ScenarioConfig,
    oracles: &mut OracleCache,
) -> Result<ScenarioReport, HarnessError> {
    config.validate()?;
    let grid = config.grid()?;
    let (fleet, mut active) = config.build_fleet()?;
    let known: BTreeSet<VehicleId> = fleet.iter().map(|v| v.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut topology = TopologyBuilder::new(&config.topology, config.seed, config.rounds);
    let mut rounds = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        for event in config.events.iter().filter(|e| e.round == round) {
            apply_event(event, &known, &mut active)?;
        }
        let members: Vec<Vehicle> = fleet
            .iter()
            .filter(|v| active.contains(&v.id))
            .cloned()
            .collect();
        let ids: Vec<VehicleId> = members.iter().map(|v| v.id).collect();
        let mut graph = topology.round_graph(&ids, round)?;
        let dummy_for = validate_privacy_precondition(&graph);
        for &weak in &dummy_for {
            graph = attach_dummy_vehicle(&graph, weak)?;
        }
        let mut participants = members.clone();
        if !dummy_for.is_empty() {
            participants.push(Vehicle::dummy());
        }

        let mut report = RoundReport {
            round,
            active: ids.clone(),
            dummy_for,
            contributors: Vec::new(),
            graph: graph.clone(),
            outcome: None,
            failure: None,
        };
        if members.is_empty() {
            report.failure = Some("no active vehicles".into());
            rounds.push(report);
            continue;
        }
        match run_round(
            &participants,
            &graph,
            &grid,
            &config.masking,
            &mut rng,
            config.share_bound,
        ) {
            Ok(outcome) => {
                report.contributors = outcome
                    .transcript
                    .prepared
                    .keys()
                    .copied()
                    .filter(|&id| id != VehicleId::DUMMY)
                    .collect();
                let curve = &outcome.recommendation.curve;
                let privacy = PrivacyReport::from_round(
                    &outcome.transcript,
                    curve,
                    &members,
                    &config.masking,
                    &grid,
                )?;
                let traffic = TrafficReport::from_transcript(&outcome.transcript);
                let true_total = grid
                    .speeds()
                    .iter()
                    .map(|&s| total_cost(&members, s))
                    .collect::<Result<Vec<_>, _>>()?;
                let true_grid_argmin = argmin(&true_total);
                let oracle = oracles.get(&members, grid.lo(), grid.hi())?;
                let accuracy = oracle::accuracy(outcome.recommendation.speed, &members, &oracle)?;
                report.outcome = Some(RoundSummary {
                    recommended_index: outcome.recommendation.index,
                    recommended_speed: outcome.recommendation.speed,
                    base_curve: curve.values().to_vec(),
                    true_total,
                    true_grid_argmin,
                    oracle,
                    accuracy,
                    privacy,
                    traffic,
                });
            }
            Err(e) => {
                log::warn!("round {round} failed: {e}");
                report.failure = Some(e.to_string());
            }
        }
        rounds.push(report);
    }

    let baseline = match config.baseline {
        Some(_) => Some(compare_baseline_with(config, oracles)?),
        None => None,
    };
    Ok(ScenarioReport {
        name: config.name.clone(),
        seed: config.seed,
        masking: config.masking,
        grid: grid.speeds().to_vec(),
        rounds,
        baseline,
    })
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
        )
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub m: usize,
    pub recommended_speed: f64,
    pub accuracy: f64,
    pub oracle_speed: f64,
}

/// Round-0 accuracy of the scenario for every grid size, all measured
/// against the same oracle.
pub fn sweep_m(
    base: &ScenarioConfig,
    m_values: &[usize],
) -> Result<Vec<AccuracyRow>, HarnessError> {
    if m_values.is_empty() {
        return Err(config_err("no grid sizes to sweep"));
    }
    let mut oracles = OracleCache::default();
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut config = base.clone();
        config.grid.m = m;
        config.rounds = 1;
        config.events.retain(|e| e.round == 0);
        config.baseline = None;
        let report = run_scenario_with(&config, &mut oracles)?;
        let round = &report.rounds[0];
        let summary = round
            .outcome
            .as_ref()
            .ok_or_else(|| HarnessError::RoundFailed {
                round: 0,
                reason: format!("M={m}: {}", round.failure.as_deref().unwrap_or_default()),
            })?;
        rows.push(AccuracyRow {
            m,
            recommended_speed: summary.recommended_speed,
            accuracy: summary.accuracy,
            oracle_speed: summary.oracle.s_star,
        });
    }
    Ok(rows)
}

pub fn write_accuracy_csv<W: std::io::Write>(rows: &[AccuracyRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "recommended_speed_kmh", "accuracy", "oracle_speed_kmh"])?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.recommended_speed.to_string(),
            r.accuracy.to_string(),
            r.oracle_speed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the protocol (one round) and the iterative baseline on the round-0
/// fleet and topology.
pub fn compare_baseline(config: &ScenarioConfig) -> Result<BaselineComparison, HarnessError> {
    compare_baseline_with(config, &mut OracleCache::default())
}

fn compare_baseline_with(
    config: &ScenarioConfig,
    oracles: &mut OracleCache,
) -> Result<BaselineComparison, HarnessError> {
    let spec = config.baseline.unwrap_or_default();
    let mut single = config.clone();
    single.rounds = 1;
    single.events.retain(|e| e.round == 0);
    single.baseline = None;
    let report = run_scenario_with(&single, oracles)?;
    let round = &report.rounds[0];
    let protocol = round
        .outcome
        .as_ref()
        .ok_or_else(|| HarnessError::RoundFailed {
            round: 0,
            reason: round.failure.clone().unwrap_or_default(),
        })?;

    let (fleet, active) = config.build_fleet()?;
    let members: Vec<Vehicle> = fleet
        .into_iter()
        .filter(|v| active.contains(&v.id))
        .collect();
    let ids: Vec<VehicleId> = members.iter().map(|v| v.id).collect();
    let (lo, hi) = (config.grid.lo, config.grid.hi);
    let graphs = match &config.topology {
        TopologySpec::Switching { window } if ids.len() >= 2 => {
            let seq = generate_switching_sequence(
                ids.len(),
                BASELINE_SEQUENCE_LEN,
                *window,
                config.seed,
            )?;
            let relabelled = seq
                .graphs()
                .iter()
                .map(|g| g.relabel(|v| ids[v.0 as usize - 1]))
                .collect::<Result<Vec<_>, _>>()?;
            GraphSequence::from_graphs(relabelled, config.seed, *window)
        }
        _ => {
            let mut builder = TopologyBuilder::new(&config.topology, config.seed, 1);
            GraphSequence::constant(builder.round_graph(&ids, 0)?)
        }
    };
    let bound = baseline::mu_upper_bound(&members, lo, hi)?;
    let dp = DpConfig {
        mu: spec.mu_fraction * bound,
        tol_consensus: spec.tol_consensus,
        tol_gradient: spec.tol_gradient,
        max_iter: spec.max_iter,
        lo,
        hi,
    };
    let s0 = baseline::initial_speeds(&members, lo, hi)?;
    let outcome = baseline::run_dp(&members, &graphs, &dp, &s0)?;
    let oracle = oracles.get(&members, lo, hi)?;
    Ok(BaselineComparison {
        protocol_rounds: 1,
        protocol_speed: protocol.recommended_speed,
        dp_iterations: outcome.iterations,
        dp_converged: outcome.converged,
        dp_speed: outcome.consensus,
        gap_kmh: (outcome.consensus - protocol.recommended_speed).abs(),
        oracle_speed: oracle.s_star,
        mu: dp.mu,
        mu_upper_bound: bound,
        final_residual: *outcome.residual_history.last().expect("at least one state"),
        fleet: ids,
        outcome,
    })
}
