//! Code-capacity sampling: depolarize every data qubit once, read every
//! stabilizer perfectly. Both logical labels are known exactly.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeLayout, PauliType};
use crate::rng::{self, Rng};
use crate::sim::{DataPoint, DetectorEvent, Labels};

const CHUNK: usize = 1024;

/// Pauli error on the data qubits as separate X and Z components.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PauliError {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
}

impl PauliError {
    pub fn identity(n: usize) -> Self {
        Self { x: vec![false; n], z: vec![false; n] }
    }

    fn parity(bits: &[bool], support: &[usize]) -> bool {
        support.iter().fold(false, |acc, &q| acc ^ bits[q])
    }

    /// Which stabilizers anticommute with the error.
    pub fn syndrome(&self, layout: &CodeLayout) -> Vec<bool> {
        layout
            .stabilizers
            .iter()
            .map(|s| match s.pauli_type {
                PauliType::Z => Self::parity(&self.x, &s.support),
                PauliType::X => Self::parity(&self.z, &s.support),
            })
            .collect()
    }

    /// (λ_Z, λ_X): whether Z_L and X_L are flipped.
    pub fn logical_flips(&self, layout: &CodeLayout) -> (bool, bool) {
        (
            Self::parity(&self.x, &layout.logical_z),
            Self::parity(&self.z, &layout.logical_x),
        )
    }

    pub fn data_point(&self, layout: &CodeLayout) -> DataPoint {
        let detectors = layout
            .stabilizers
            .iter()
            .zip(self.syndrome(layout))
            .filter(|(_, fired)| *fired)
            .map(|(s, _)| DetectorEvent::new(s.pauli_type, s.ancilla, 1))
            .collect();
        let (z, x) = self.logical_flips(layout);
        DataPoint { detectors, labels: Labels::both(z, x) }
    }

    fn draw(rng: &mut Rng, n: usize, p: f64) -> Self {
        let mut e = Self::identity(n);
        for q in 0..n {
            if rng.random::<f64>() < p {
                let r = rng.random_range(1..4u8);
                e.x[q] = r & 1 != 0;
                e.z[q] = r & 2 != 0;
            }
        }
        e
    }
}

fn check(layout: &CodeLayout, p: f64) -> Result<()> {
    if layout.kind != CodeKind::RotatedSurface {
        return Err(Error::Validation("perfect-stabilizer sampling needs a surface layout".into()));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Validation(format!("p must lie in [0, 1), got {p}")));
    }
    Ok(())
}

/// Samples `shots` errors; chunk `k` of 1024 shots uses stream `k` of `seed`.
pub fn sample_perfect_errors(
    layout: &CodeLayout,
    p: f64,
    seed: u64,
    shots: usize,
) -> Result<Vec<PauliError>> {
    check(layout, p)?;
    let n = layout.num_data();
    Ok((0..shots.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = rng::stream(seed, k as u64);
            let count = (shots - k * CHUNK).min(CHUNK);
            (0..count).map(|_| PauliError::draw(&mut rng, n, p)).collect::<Vec<_>>()
        })
        .collect())
}

pub fn sample_perfect_batch(
    layout: &CodeLayout,
    p: f64,
    seed: u64,
    shots: usize,
) -> Result<Vec<DataPoint>> {
    Ok(sample_perfect_errors(layout, p, seed, shots)?
        .iter()
        .map(|e| e.data_point(layout))
        .collect())
}

/// One shot; equal to the first shot of [`sample_perfect_batch`].
pub fn sample_perfect(layout: &CodeLayout, p: f64, seed: u64) -> Result<DataPoint> {
    Ok(sample_perfect_batch(layout, p, seed, 1)?.pop().unwrap())
}
