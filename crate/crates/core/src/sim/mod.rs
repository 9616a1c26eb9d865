//! Memory-experiment simulation.
//!
//! [`circuit`] builds the noisy syndrome-extraction circuits, [`frame`]
//! samples them with a bit-packed Pauli-frame simulator, [`dem`] enumerates
//! single faults into a detector error model and [`perfect`] samples the
//! code-capacity model (one depolarizing layer, perfect readout).

pub mod circuit;
pub mod dem;
pub mod frame;
pub mod perfect;

use std::fmt;

pub use circuit::{build_memory_circuit, Circuit, DetectorDef, Instruction, LabelDef};
pub use dem::{DemEntry, DetectorErrorModel};
pub use frame::{propagate, sample, sample_batch, sample_records, Fault, MeasurementRecord};
pub use perfect::{sample_perfect, sample_perfect_batch, sample_perfect_errors, PauliError};

use crate::error::{Error, Result};
use crate::geometry::{Coord, PauliType};

/// Memory-experiment basis: which logical operator is initialised and read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    /// Stabilizer type whose detectors span every round in this basis.
    pub fn aligned(self) -> PauliType {
        match self {
            Basis::Z => PauliType::Z,
            Basis::X => PauliType::X,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("z"),
            Basis::X => f.write_str("x"),
        }
    }
}

/// One fired detector: stabilizer type and space-time position.
///
/// Field order gives the canonical ordering used for tie-breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectorEvent {
    pub kind: PauliType,
    pub x2: i32,
    pub y2: i32,
    pub t: u32,
}

impl DetectorEvent {
    pub fn new(kind: PauliType, at: Coord, t: u32) -> Self {
        Self { kind, x2: at.x2, y2: at.y2, t }
    }

    pub fn coord(&self) -> Coord {
        Coord::new(self.x2, self.y2)
    }
}

/// Measured logical labels. `z` is the Z_L flip (λ_Z), `x` the X_L flip (λ_X).
/// A memory experiment provides exactly one of them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Labels {
    pub z: Option<bool>,
    pub x: Option<bool>,
}

impl Labels {
    pub fn z(v: bool) -> Self {
        Self { z: Some(v), x: None }
    }

    pub fn x(v: bool) -> Self {
        Self { z: None, x: Some(v) }
    }

    pub fn both(z: bool, x: bool) -> Self {
        Self { z: Some(z), x: Some(x) }
    }

    /// Label for head `0` (Z) or `1` (X).
    pub fn head(&self, head: usize) -> Option<bool> {
        match head {
            0 => self.z,
            1 => self.x,
            _ => None,
        }
    }

    pub fn count(&self) -> usize {
        usize::from(self.z.is_some()) + usize::from(self.x.is_some())
    }
}

/// One shot: fired detectors and the measured logical label(s).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DataPoint {
    pub detectors: Vec<DetectorEvent>,
    pub labels: Labels,
}

impl DataPoint {
    pub fn basis(&self) -> Option<Basis> {
        match (self.labels.z, self.labels.x) {
            (Some(_), None) => Some(Basis::Z),
            (None, Some(_)) => Some(Basis::X),
            _ => None,
        }
    }
}

/// Circuit-level noise strengths. [`NoiseParams::uniform`] sets every
/// channel to the same `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Depolarizing noise on every data qubit at the start of each round.
    pub data_depolarize: f64,
    /// Pure X flips on every data qubit at the start of each round.
    pub data_bit_flip: f64,
    /// Depolarizing noise after single-qubit gates.
    pub gate1: f64,
    /// Two-qubit depolarizing noise after every CNOT.
    pub gate2: f64,
    pub measure_flip: f64,
    pub reset_flip: f64,
}

impl NoiseParams {
    pub fn none() -> Self {
        Self {
            data_depolarize: 0.0,
            data_bit_flip: 0.0,
            gate1: 0.0,
            gate2: 0.0,
            measure_flip: 0.0,
            reset_flip: 0.0,
        }
    }

    pub fn uniform(p: f64) -> Result<Self> {
        let n = Self {
            data_depolarize: p,
            gate1: p,
            gate2: p,
            measure_flip: p,
            reset_flip: p,
            ..Self::none()
        };
        n.validate()?;
        Ok(n)
    }

    /// Bit flips on data qubits only; measurements and gates are perfect.
    pub fn data_bit_flip(p: f64) -> Result<Self> {
        let n = Self { data_bit_flip: p, ..Self::none() };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.data_depolarize,
            self.data_bit_flip,
            self.gate1,
            self.gate2,
            self.measure_flip,
            self.reset_flip,
        ];
        if all.iter().all(|p| (0.0..1.0).contains(p)) {
            Ok(())
        } else {
            Err(Error::Validation(format!("noise probabilities must lie in [0, 1): {all:?}")))
        }
    }
}
