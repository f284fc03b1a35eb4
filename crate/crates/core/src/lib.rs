//! Privacy-preserving consensus speed advisory.
//!
//! Vehicles hide their private speed–emission tables behind additive secret
//! shares exchanged over a directed V2V graph. A base station only ever sees
//! locally aggregated share sums, whose pointwise total equals the (optionally
//! affinely masked) fleet cost curve, and broadcasts the speed at its minimum.
//! One batch round suffices.
//!
//! Alongside the protocol the crate ships the iterative derivative-based
//! consensus scheme it replaces ([`baseline`]), a brute-force ground-truth
//! solver ([`oracle`]), privacy and traffic metrics ([`metrics`]) and a
//! deterministic scenario harness ([`harness`]).

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod baseline;
pub mod cli;
pub mod emissions;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod protocol;

/// Identifier of a vehicle (graph vertex).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl VehicleId {
    /// Reserved id of the base-station-resident dummy participant.
    pub const DUMMY: VehicleId = VehicleId(u32::MAX);
}

impl From<u32> for VehicleId {
    fn from(id: u32) -> Self {
        VehicleId(id)
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == VehicleId::DUMMY {
            f.write_str("dummy")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
