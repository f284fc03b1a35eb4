//! Pair encoding shared by V2V share messages and vehicle-to-base tables.
//!
//! A body is `M` consecutive pairs of little-endian `i32`: the grid speed
//! rounded to whole km/h, then the value in fixed-point units. Position in
//! the body identifies the grid point; the speed field is checked on decode.

use crate::emissions::SpeedGrid;

use super::{FixedPoint, ProtocolError};

pub const PAIR_BYTES: usize = 8;

fn wire_speed(speed: f64) -> i32 {
    speed.round() as i32
}

pub fn encode_pairs(grid: &SpeedGrid, values: &[FixedPoint]) -> Result<Vec<u8>, ProtocolError> {
    if values.len() != grid.len() {
        return Err(ProtocolError::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    let mut out = Vec::with_capacity(values.len() * PAIR_BYTES);
    for (&speed, value) in grid.speeds().iter().zip(values) {
        out.extend_from_slice(&wire_speed(speed).to_le_bytes());
        out.extend_from_slice(&value.raw().to_le_bytes());
    }
    Ok(out)
}

pub fn decode_pairs(grid: &SpeedGrid, bytes: &[u8]) -> Result<Vec<FixedPoint>, ProtocolError> {
    if bytes.len() != grid.len() * PAIR_BYTES {
        return Err(ProtocolError::Malformed(format!(
            "expected {} bytes for {} pairs, got {}",
            grid.len() * PAIR_BYTES,
            grid.len(),
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(PAIR_BYTES)
        .zip(grid.speeds())
        .enumerate()
        .map(|(j, (pair, &speed))| {
            let s = i32::from_le_bytes(pair[..4].try_into().expect("4 bytes"));
            let v = i32::from_le_bytes(pair[4..].try_into().expect("4 bytes"));
            if s != wire_speed(speed) {
                return Err(ProtocolError::Malformed(format!(
                    "pair {j} carries speed {s}, grid expects {}",
                    wire_speed(speed)
                )));
            }
            Ok(FixedPoint::from_raw(v))
        })
        .collect()
}

/// Recommendation broadcast: one pair of (speed, grid index).
pub fn encode_broadcast(speed: f64, index: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(PAIR_BYTES);
    out.extend_from_slice(&wire_speed(speed).to_le_bytes());
    out.extend_from_slice(&(index as i32).to_le_bytes());
    out
}
