//! One batch round of the secret-sharing speed advisory protocol.
//!
//! Every vehicle tabulates its cost on the shared speed grid, masks each
//! value with the fleet-wide affine map `a·f + b`, and splits it into
//! `deg⁺ + 1` additive shares. One share stays local, the others go to its
//! out-neighbors. Each vehicle then sums what it kept with what it received
//! and sends that table to the base station, whose pointwise sum equals the
//! masked fleet total. The base station broadcasts the grid speed at the
//! minimum.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emissions::{EmissionError, SpeedGrid, Vehicle};
use crate::graph::{validate_privacy_precondition, CommGraph, GraphError};
use crate::VehicleId;

mod fixed;
mod shares;
pub mod wire;

pub use fixed::{FixedPoint, SCALE};
pub use shares::{split_shares, ScriptedShares, ShareBound, ShareSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("value {value} does not fit the 32-bit fixed-point encoding")]
    Encoding { value: f64 },
    #[error("masking multiplier must be positive and finite (a={a}, b={b})")]
    InvalidMasking { a: f64, b: f64 },
    #[error("share bound must be within [0, 2^31), got {0}")]
    InvalidBound(i64),
    #[error("a value must be split into at least 2 shares, got {0}")]
    TooFewShares(usize),
    #[error("vehicles without an out-neighbor cannot share privately: {0:?}")]
    PrivacyPrecondition(Vec<VehicleId>),
    #[error("table length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("message {sender} -> {receiver} delivered to {at}")]
    Misrouted {
        sender: VehicleId,
        receiver: VehicleId,
        at: VehicleId,
    },
    #[error("round incomplete, missing tables from {0:?}")]
    IncompleteRound(Vec<VehicleId>),
    #[error("unexpected or duplicate table from {0}")]
    UnexpectedTable(VehicleId),
    #[error("aggregate curve is empty")]
    EmptyCurve,
    #[error("scripted share source ran out of shares")]
    SharesExhausted,
    #[error("fleet and graph disagree on vehicle {0}")]
    TopologyMismatch(VehicleId),
    #[error("aggregate at grid point {index} leaves the 32-bit range")]
    AggregateOverflow { index: usize },
    #[error("malformed wire payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Cost(#[from] EmissionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Fleet-wide affine map `g(x) = a·x + b`; `a > 0` keeps the argmin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskingParams {
    pub a: f64,
    pub b: f64,
}

impl MaskingParams {
    pub const IDENTITY: MaskingParams = MaskingParams { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self, ProtocolError> {
        let p = MaskingParams { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.a > 0.0 && self.a.is_finite() && self.b.is_finite() {
            Ok(())
        } else {
            Err(ProtocolError::InvalidMasking {
                a: self.a,
                b: self.b,
            })
        }
    }
}

impl Default for MaskingParams {
    fn default() -> Self {
        MaskingParams::IDENTITY
    }
}

pub fn mask(value: f64, params: &MaskingParams) -> Result<FixedPoint, ProtocolError> {
    params.validate()?;
    FixedPoint::from_real(params.a * value + params.b)
}

/// A vehicle's masked cost at every grid point. Never leaves the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTable {
    pub vehicle: VehicleId,
    pub values: Vec<FixedPoint>,
}

impl CostTable {
    pub fn build(
        vehicle: &Vehicle,
        grid: &SpeedGrid,
        params: &MaskingParams,
    ) -> Result<Self, ProtocolError> {
        let values = grid
            .speeds()
            .iter()
            .map(|&s| mask(vehicle.cost.cost(s)?, params))
            .collect::<Result<_, _>>()?;
        Ok(CostTable {
            vehicle: vehicle.id,
            values,
        })
    }
}

/// Shares one vehicle sends to one out-neighbor, one per grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareMessage {
    pub sender: VehicleId,
    pub receiver: VehicleId,
    pub shares: Vec<FixedPoint>,
}

impl ShareMessage {
    pub fn encode(&self, grid: &SpeedGrid) -> Result<Vec<u8>, ProtocolError> {
        wire::encode_pairs(grid, &self.shares)
    }

    pub fn decode(
        sender: VehicleId,
        receiver: VehicleId,
        grid: &SpeedGrid,
        bytes: &[u8],
    ) -> Result<Self, ProtocolError> {
        Ok(ShareMessage {
            sender,
            receiver,
            shares: wire::decode_pairs(grid, bytes)?,
        })
    }
}

/// Kept share plus every received share, per grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedTable {
    pub vehicle: VehicleId,
    pub values: Vec<FixedPoint>,
}

impl AggregatedTable {
    pub fn encode(&self, grid: &SpeedGrid) -> Result<Vec<u8>, ProtocolError> {
        wire::encode_pairs(grid, &self.values)
    }

    pub fn decode(
        vehicle: VehicleId,
        grid: &SpeedGrid,
        bytes: &[u8],
    ) -> Result<Self, ProtocolError> {
        Ok(AggregatedTable {
            vehicle,
            values: wire::decode_pairs(grid, bytes)?,
        })
    }
}

/// Pointwise total seen by the base station.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AggregateCurve(pub Vec<FixedPoint>);

impl AggregateCurve {
    pub fn values(&self) -> &[FixedPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub index: usize,
    pub speed: f64,
    pub curve: AggregateCurve,
}

/// A vehicle's state after splitting: its private table, the shares it
/// keeps and the messages it is about to send.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreparedShares {
    pub vehicle: VehicleId,
    pub masked: CostTable,
    pub kept: Vec<FixedPoint>,
    pub outgoing: Vec<ShareMessage>,
}

/// Tabulate, mask and split one vehicle's costs.
///
/// Share 0 of every split is kept; the remaining shares go to the
/// out-neighbors in ascending id order, the residual share to the last one.
/// The dummy participant has nothing to hide and keeps an all-zero table.
pub fn prepare_round<S: ShareSource + ?Sized>(
    vehicle: &Vehicle,
    grid: &SpeedGrid,
    params: &MaskingParams,
    graph: &CommGraph,
    source: &mut S,
    bound: ShareBound,
) -> Result<PreparedShares, ProtocolError> {
    let m = grid.len();
    if vehicle.is_dummy() {
        return Ok(PreparedShares {
            vehicle: vehicle.id,
            masked: CostTable {
                vehicle: vehicle.id,
                values: vec![FixedPoint::ZERO; m],
            },
            kept: vec![FixedPoint::ZERO; m],
            outgoing: Vec::new(),
        });
    }
    let neighbors = graph.out_neighbors(vehicle.id)?;
    if neighbors.is_empty() {
        return Err(ProtocolError::PrivacyPrecondition(vec![vehicle.id]));
    }
    let masked = CostTable::build(vehicle, grid, params)?;
    let mut kept = Vec::with_capacity(m);
    let mut outgoing: Vec<ShareMessage> = neighbors
        .iter()
        .map(|&receiver| ShareMessage {
            sender: vehicle.id,
            receiver,
            shares: Vec::with_capacity(m),
        })
        .collect();
    for &value in &masked.values {
        let shares = split_shares(value, neighbors.len() + 1, source, bound)?;
        kept.push(shares[0]);
        for (msg, &share) in outgoing.iter_mut().zip(&shares[1..]) {
            msg.shares.push(share);
        }
    }
    Ok(PreparedShares {
        vehicle: vehicle.id,
        masked,
        kept,
        outgoing,
    })
}

pub fn aggregate_local(
    vehicle: VehicleId,
    kept: &[FixedPoint],
    inbox: &[ShareMessage],
) -> Result<AggregatedTable, ProtocolError> {
    let mut values = kept.to_vec();
    for msg in inbox {
        if msg.receiver != vehicle {
            return Err(ProtocolError::Misrouted {
                sender: msg.sender,
                receiver: msg.receiver,
                at: vehicle,
            });
        }
        if msg.shares.len() != values.len() {
            return Err(ProtocolError::LengthMismatch {
                expected: values.len(),
                got: msg.shares.len(),
            });
        }
        for (acc, &share) in values.iter_mut().zip(&msg.shares) {
            *acc += share;
        }
    }
    Ok(AggregatedTable { vehicle, values })
}

/// Sums one table per participant. Missing, unknown or duplicate tables
/// abort the round.
pub fn base_station_aggregate(
    tables: &[AggregatedTable],
    participants: &BTreeSet<VehicleId>,
) -> Result<AggregateCurve, ProtocolError> {
    let mut seen = BTreeSet::new();
    for t in tables {
        if !participants.contains(&t.vehicle) || !seen.insert(t.vehicle) {
            return Err(ProtocolError::UnexpectedTable(t.vehicle));
        }
    }
    let missing: Vec<_> = participants.difference(&seen).copied().collect();
    if !missing.is_empty() {
        return Err(ProtocolError::IncompleteRound(missing));
    }
    let Some(first) = tables.first() else {
        return Err(ProtocolError::EmptyCurve);
    };
    let m = first.values.len();
    let mut curve = vec![FixedPoint::ZERO; m];
    for t in tables {
        if t.values.len() != m {
            return Err(ProtocolError::LengthMismatch {
                expected: m,
                got: t.values.len(),
            });
        }
        for (acc, &v) in curve.iter_mut().zip(&t.values) {
            *acc += v;
        }
    }
    Ok(AggregateCurve(curve))
}

/// Lowest value wins; ties go to the lowest index.
pub fn select_best(
    curve: &AggregateCurve,
    grid: &SpeedGrid,
) -> Result<Recommendation, ProtocolError> {
    if curve.is_empty() {
        return Err(ProtocolError::EmptyCurve);
    }
    if curve.len() != grid.len() {
        return Err(ProtocolError::LengthMismatch {
            expected: grid.len(),
            got: curve.len(),
        });
    }
    let index = curve
        .values()
        .iter()
        .enumerate()
        .min_by_key(|&(j, v)| (*v, j))
        .map(|(j, _)| j)
        .expect("non-empty");
    Ok(Recommendation {
        index,
        speed: grid.speeds()[index],
        curve: curve.clone(),
    })
}

/// Inverts the masking on a base-station curve for `n` contributing
/// vehicles. Test and metrics use only; the base station never knows the
/// masking parameters.
pub fn unmask_aggregate(
    curve: &AggregateCurve,
    params: &MaskingParams,
    n: usize,
) -> Result<Vec<f64>, ProtocolError> {
    params.validate()?;
    Ok(curve
        .values()
        .iter()
        .map(|v| (v.to_real() - n as f64 * params.b) / params.a)
        .collect())
}

/// Bytes of one wire transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transmission {
    pub from: VehicleId,
    pub to: Option<VehicleId>,
    pub bytes: usize,
}

/// Everything that happened in a round, for metrics and inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTranscript {
    pub prepared: BTreeMap<VehicleId, PreparedShares>,
    pub inboxes: BTreeMap<VehicleId, Vec<ShareMessage>>,
    pub tables: Vec<AggregatedTable>,
    /// Vehicle-to-vehicle share messages (including those to the dummy).
    pub v2v: Vec<Transmission>,
    /// Vehicle-to-base aggregated tables; the dummy's table stays in the base.
    pub v2b: Vec<Transmission>,
    pub broadcast_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub recommendation: Recommendation,
    pub transcript: RoundTranscript,
}

/// Runs one complete round over `fleet`, whose ids must be exactly the
/// graph's vertices. Messages travel through their wire encoding.
pub fn run_round<S: ShareSource + ?Sized>(
    fleet: &[Vehicle],
    graph: &CommGraph,
    grid: &SpeedGrid,
    params: &MaskingParams,
    source: &mut S,
    bound: ShareBound,
) -> Result<RoundOutcome, ProtocolError> {
    params.validate()?;
    let by_id: BTreeMap<VehicleId, &Vehicle> = fleet.iter().map(|v| (v.id, v)).collect();
    for v in fleet {
        if !graph.contains(v.id) {
            return Err(ProtocolError::TopologyMismatch(v.id));
        }
    }
    if let Some(v) = graph.vertices().find(|v| !by_id.contains_key(v)) {
        return Err(ProtocolError::TopologyMismatch(v));
    }
    let weak: Vec<_> = validate_privacy_precondition(graph)
        .into_iter()
        .filter(|&v| v != VehicleId::DUMMY)
        .collect();
    if !weak.is_empty() {
        return Err(ProtocolError::PrivacyPrecondition(weak));
    }

    let mut prepared = BTreeMap::new();
    for (&id, vehicle) in &by_id {
        prepared.insert(
            id,
            prepare_round(vehicle, grid, params, graph, source, bound)?,
        );
    }
    check_aggregate_range(prepared.values(), grid.len())?;

    let mut inboxes: BTreeMap<VehicleId, Vec<ShareMessage>> =
        by_id.keys().map(|&id| (id, Vec::new())).collect();
    let mut v2v = Vec::new();
    for p in prepared.values() {
        for msg in &p.outgoing {
            let bytes = msg.encode(grid)?;
            v2v.push(Transmission {
                from: msg.sender,
                to: Some(msg.receiver),
                bytes: bytes.len(),
            });
            let delivered = ShareMessage::decode(msg.sender, msg.receiver, grid, &bytes)?;
            inboxes
                .get_mut(&msg.receiver)
                .expect("receiver is a vertex")
                .push(delivered);
        }
    }

    let mut tables = Vec::with_capacity(prepared.len());
    let mut v2b = Vec::new();
    for (&id, p) in &prepared {
        let table = aggregate_local(id, &p.kept, &inboxes[&id])?;
        if id == VehicleId::DUMMY {
            tables.push(table);
            continue;
        }
        let bytes = table.encode(grid)?;
        v2b.push(Transmission {
            from: id,
            to: None,
            bytes: bytes.len(),
        });
        tables.push(AggregatedTable::decode(id, grid, &bytes)?);
    }

    let participants: BTreeSet<VehicleId> = by_id.keys().copied().collect();
    let curve = base_station_aggregate(&tables, &participants)?;
    let recommendation = select_best(&curve, grid)?;
    let broadcast_bytes = wire::encode_broadcast(recommendation.speed, recommendation.index).len();
    Ok(RoundOutcome {
        recommendation,
        transcript: RoundTranscript {
            prepared,
            inboxes,
            tables,
            v2v,
            v2b,
            broadcast_bytes,
        },
    })
}

// The ring sum is exact only if the true total fits in 32 bits; the
// simulator checks that from the private tables it holds anyway.
fn check_aggregate_range<'a>(
    prepared: impl Iterator<Item = &'a PreparedShares>,
    m: usize,
) -> Result<(), ProtocolError> {
    let mut totals = vec![0i64; m];
    for p in prepared {
        for (t, v) in totals.iter_mut().zip(&p.masked.values) {
            *t += v.raw() as i64;
        }
    }
    match totals.iter().position(|t| i32::try_from(*t).is_err()) {
        Some(index) => Err(ProtocolError::AggregateOverflow { index }),
        None => Ok(()),
    }
}
