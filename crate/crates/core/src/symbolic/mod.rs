//! Symbolic dynamics: external addresses, their order, and kneading sequences.

mod address;
mod kneading;
pub mod reference;

use std::f64::consts::TAU;

use thiserror::Error;

use crate::dynamics::{eval_map, strip_index, strip_margin, Complex};

pub(crate) use address::gcd;
pub use address::{lex_compare, Address, ExternalAddress, Horizon, IntermediateAddress, Itinerary};
pub use kneading::{
    first_kneading_disagreement, kneading_disagreement, kneading_sequence, sector_almost_equal,
    Disagreement, KneadingSequence, KneadingSymbol,
};

/// Iterates closer than this to a strip boundary have no reliable strip.
pub const STRIP_AMBIGUITY: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("the period block of an address must be nonempty")]
    EmptyPeriod,
    #[error("cannot parse address {0}")]
    Parse(String),
    #[error("addresses are identical")]
    IdenticalAddresses,
    #[error("kneading sequence has period {found} (preperiodic: {preperiodic}), expected period {expected}")]
    PeriodMismatch {
        expected: usize,
        found: usize,
        preperiodic: bool,
    },
    #[error("iterate {index} lies within {distance:.3e} of a strip boundary")]
    AmbiguousStrip { index: usize, distance: f64 },
    #[error("orbit overflowed at iterate {0}")]
    Overflow(usize),
}

/// Strip indices of the given orbit points.
pub fn address_of_points(points: &[Complex]) -> Result<Vec<i64>, SymbolicError> {
    points
        .iter()
        .enumerate()
        .map(|(index, &z)| {
            let distance = strip_margin(z) * TAU;
            if distance < STRIP_AMBIGUITY {
                Err(SymbolicError::AmbiguousStrip { index, distance })
            } else {
                Ok(strip_index(z))
            }
        })
        .collect()
}

/// First `depth` strip indices of the orbit of `z` under `E_kappa`.
pub fn address_of_escape(kappa: Complex, z: Complex, depth: usize) -> Result<Vec<i64>, SymbolicError> {
    let mut points = Vec::with_capacity(depth);
    let mut w = z;
    for j in 0..depth {
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(SymbolicError::Overflow(j));
        }
        points.push(w);
        if j + 1 < depth {
            w = eval_map(kappa, w).map_err(|_| SymbolicError::Overflow(j + 1))?;
        }
    }
    address_of_points(&points)
}
