//! Post-hoc measurements on a completed round: what each vehicle and the
//! base station could infer, and how many bytes moved.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::emissions::{total_cost, EmissionError, SpeedGrid, Vehicle};
use crate::protocol::wire::PAIR_BYTES;
use crate::protocol::{
    mask, AggregateCurve, MaskingParams, ProtocolError, RoundTranscript, ShareMessage, Transmission,
};
use crate::VehicleId;

/// Best additive guess a curious vehicle can make about its in-neighbors:
/// the sum of received shares, compared with the true masked costs of the
/// senders. Real units, one entry per grid point.
pub fn local_estimated_error(
    inbox: &[ShareMessage],
    fleet: &[Vehicle],
    params: &MaskingParams,
    grid: &SpeedGrid,
) -> Result<Vec<f64>, ProtocolError> {
    let mut error = vec![0.0; grid.len()];
    for msg in inbox {
        let sender = fleet
            .iter()
            .find(|v| v.id == msg.sender)
            .ok_or(ProtocolError::TopologyMismatch(msg.sender))?;
        if msg.shares.len() != grid.len() {
            return Err(ProtocolError::LengthMismatch {
                expected: grid.len(),
                got: msg.shares.len(),
            });
        }
        for ((e, share), &speed) in error.iter_mut().zip(&msg.shares).zip(grid.speeds()) {
            let truth = mask(sender.cost.cost(speed)?, params)?;
            *e += (share.raw() as i64 - truth.raw() as i64) as f64 / 1000.0;
        }
    }
    Ok(error)
}

/// Unscaled base-station value minus the true fleet total, per grid point.
pub fn base_station_deviation(
    curve: &AggregateCurve,
    fleet: &[Vehicle],
    grid: &SpeedGrid,
) -> Result<Vec<f64>, EmissionError> {
    curve
        .values()
        .iter()
        .zip(grid.speeds())
        .map(|(v, &s)| Ok(v.to_real() - total_cost(fleet, s)?))
        .collect()
}

/// Size of an `m`-pair wire body.
pub fn pair_payload_bytes(m: usize) -> usize {
    PAIR_BYTES * m
}

pub fn message_bytes(msg: &ShareMessage) -> usize {
    pair_payload_bytes(msg.shares.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    /// Local estimated error curve of every vehicle that received shares.
    pub local_errors: BTreeMap<VehicleId, Vec<f64>>,
    pub base_deviation: Vec<f64>,
    /// Vehicles whose estimate was exact at every grid point: their
    /// in-neighbors' masked costs leaked.
    pub exposed: Vec<VehicleId>,
}

impl PrivacyReport {
    pub fn from_round(
        transcript: &RoundTranscript,
        curve: &AggregateCurve,
        fleet: &[Vehicle],
        params: &MaskingParams,
        grid: &SpeedGrid,
    ) -> Result<Self, ProtocolError> {
        let mut local_errors = BTreeMap::new();
        let mut exposed = Vec::new();
        for (&id, inbox) in &transcript.inboxes {
            let err = local_estimated_error(inbox, fleet, params, grid)?;
            if !inbox.is_empty() && err.iter().all(|e| *e == 0.0) {
                exposed.push(id);
            }
            local_errors.insert(id, err);
        }
        let base_deviation = base_station_deviation(curve, fleet, grid)?;
        Ok(PrivacyReport {
            local_errors,
            base_deviation,
            exposed,
        })
    }

    /// Fraction of grid points at which `vehicle`'s estimate is off.
    pub fn nonzero_fraction(&self, vehicle: VehicleId) -> Option<f64> {
        let err = self.local_errors.get(&vehicle)?;
        if err.is_empty() {
            return Some(0.0);
        }
        Some(err.iter().filter(|e| **e != 0.0).count() as f64 / err.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficReport {
    pub v2v: Vec<Transmission>,
    pub v2b: Vec<Transmission>,
    pub v2v_bytes: usize,
    pub v2b_bytes: usize,
    pub broadcast_bytes: usize,
    pub total_bytes: usize,
    /// Share messages + tables + one broadcast.
    pub messages: usize,
}

impl TrafficReport {
    pub fn from_transcript(t: &RoundTranscript) -> Self {
        let v2v_bytes = t.v2v.iter().map(|m| m.bytes).sum();
        let v2b_bytes = t.v2b.iter().map(|m| m.bytes).sum();
        TrafficReport {
            v2v: t.v2v.clone(),
            v2b: t.v2b.clone(),
            v2v_bytes,
            v2b_bytes,
            broadcast_bytes: t.broadcast_bytes,
            total_bytes: v2v_bytes + v2b_bytes + t.broadcast_bytes,
            messages: t.v2v.len() + t.v2b.len() + 1,
        }
    }
}

/// Plot-ready CSV: `speed_kmh` followed by one column per named curve.
pub fn write_curves_csv<W: Write>(
    grid: &SpeedGrid,
    columns: &[(String, Vec<f64>)],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["speed_kmh".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for (j, speed) in grid.speeds().iter().enumerate() {
        let mut row = vec![speed.to_string()];
        row.extend(columns.iter().map(|(_, values)| values[j].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emissions::{build_speed_grid, CostModel, VehicleClass};
    use crate::graph::ring_topology;
    use crate::protocol::{run_round, FixedPoint, ShareBound};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn byte_counts() {
        assert_eq!(pair_payload_bytes(19), 152);
        assert_eq!(pair_payload_bytes(0), 0);
        assert_eq!(20 * pair_payload_bytes(19), 3040);
        let msg = ShareMessage {
            sender: VehicleId(1),
            receiver: VehicleId(2),
            shares: vec![FixedPoint::ZERO; 19],
        };
        assert_eq!(message_bytes(&msg), 152);
    }

    #[test]
    fn empty_inbox_gives_zero_error() {
        let grid = build_speed_grid(5, 5.0, 140.0).unwrap();
        assert_eq!(
            local_estimated_error(&[], &[], &MaskingParams::IDENTITY, &grid).unwrap(),
            vec![0.0; 5]
        );
    }

    #[test]
    fn zero_bound_exposes_ring_neighbors() {
        let grid = build_speed_grid(10, 5.0, 140.0).unwrap();
        let fleet: Vec<_> = VehicleClass::ALL
            .iter()
            .zip(1..)
            .map(|(&c, i)| Vehicle::of_class(i, c))
            .collect();
        let g = ring_topology(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bound = ShareBound::new(0).unwrap();
        let out = run_round(&fleet, &g, &grid, &MaskingParams::IDENTITY, &mut rng, bound).unwrap();
        let report = PrivacyReport::from_round(
            &out.transcript,
            &out.recommendation.curve,
            &fleet,
            &MaskingParams::IDENTITY,
            &grid,
        )
        .unwrap();
        assert_eq!(report.exposed.len(), 6);
        assert!(report
            .local_errors
            .values()
            .all(|e| e.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn constant_offset_deviation() {
        let grid = build_speed_grid(4, 10.0, 40.0).unwrap();
        let fleet = vec![Vehicle::of_class(1, VehicleClass::R012)];
        let params = MaskingParams::new(1.0, 5.0).unwrap();
        let values: Vec<_> = grid
            .speeds()
            .iter()
            .map(|&s| mask(fleet[0].cost.cost(s).unwrap(), &params).unwrap())
            .collect();
        let dev = base_station_deviation(&AggregateCurve(values), &fleet, &grid).unwrap();
        assert!(
            dev.iter().all(|d| (d - 5.0).abs() <= 0.0005 + 1e-9),
            "{dev:?}"
        );
    }

    #[test]
    fn unknown_sender_is_rejected() {
        let grid = build_speed_grid(2, 40.0, 50.0).unwrap();
        let msg = ShareMessage {
            sender: VehicleId(8),
            receiver: VehicleId(1),
            shares: vec![FixedPoint::ZERO; 2],
        };
        let fleet = vec![Vehicle::new(1, CostModel::Zero)];
        assert!(local_estimated_error(&[msg], &fleet, &MaskingParams::IDENTITY, &grid).is_err());
    }

    #[test]
    fn curves_csv_has_header() {
        let grid = build_speed_grid(2, 40.0, 50.0).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(
            &grid,
            &[("total_g_per_km".into(), vec![1.5, 2.0])],
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "speed_kmh,total_g_per_km\n40,1.5\n50,2\n"
        );
    }
}
