//! Detector error models from single-fault enumeration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::geometry::{CodeLayout, PauliType};
use crate::sim::frame::{inject, run, LANES};
use crate::sim::{Circuit, DetectorEvent, Instruction};

/// Observable bit for the Z_L flip (λ_Z).
pub const OBS_Z: u8 = 1;
/// Observable bit for the X_L flip (λ_X).
pub const OBS_X: u8 = 2;

pub fn observable_bit(t: PauliType) -> u8 {
    match t {
        PauliType::Z => OBS_Z,
        PauliType::X => OBS_X,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemEntry {
    pub probability: f64,
    /// Sorted detector indices.
    pub detectors: Vec<u32>,
    /// Bit mask of flipped observables ([`OBS_Z`], [`OBS_X`]).
    pub observables: u8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectorErrorModel {
    pub entries: Vec<DemEntry>,
    /// Detector index → event (type, position, round).
    pub detectors: Vec<DetectorEvent>,
}

/// Probability that exactly one of two independent events happens.
pub fn xor_combine(q1: f64, q2: f64) -> f64 {
    q1 * (1.0 - q2) + q2 * (1.0 - q1)
}

#[derive(Default)]
struct Accumulator {
    merged: BTreeMap<(Vec<u32>, u8), f64>,
}

impl Accumulator {
    fn add(&mut self, mut detectors: Vec<u32>, observables: u8, q: f64) {
        if detectors.is_empty() || q <= 0.0 {
            return;
        }
        detectors.sort_unstable();
        let slot = self.merged.entry((detectors, observables)).or_insert(0.0);
        *slot = xor_combine(*slot, q);
    }

    fn finish(self, detectors: Vec<DetectorEvent>) -> DetectorErrorModel {
        let entries = self
            .merged
            .into_iter()
            .map(|((detectors, observables), probability)| DemEntry {
                probability,
                detectors,
                observables,
            })
            .collect();
        DetectorErrorModel { entries, detectors }
    }
}

/// Every non-identity Pauli outcome of a noise instruction with its probability.
fn outcomes(ins: &Instruction) -> Vec<([u8; 2], f64)> {
    match *ins {
        Instruction::Depolarize1 { p, .. } => (1..4u8).map(|r| ([r, 0], p / 3.0)).collect(),
        Instruction::Depolarize2 { p, .. } => {
            (1..16u8).map(|r| ([r & 3, r >> 2], p / 15.0)).collect()
        }
        Instruction::FlipMeasure { p, .. }
        | Instruction::FlipReset { p, .. }
        | Instruction::BitFlip { p, .. } => vec![([1, 0], p)],
        _ => Vec::new(),
    }
}

impl DetectorErrorModel {
    /// Propagates every single fault of the circuit and merges identical
    /// signatures. Faults are packed 64 to a frame word.
    pub fn from_circuit(circuit: &Circuit) -> Self {
        let mut faults: Vec<(usize, [u8; 2], f64)> = Vec::new();
        for (i, ins) in circuit.noise_sites() {
            for (paulis, q) in outcomes(ins) {
                faults.push((i, paulis, q));
            }
        }
        let obs = observable_bit(circuit.label.observable);
        let mut acc = Accumulator::default();
        for chunk in faults.chunks(LANES) {
            let frame = run(circuit, |i, ins, f| {
                for (lane, &(site, paulis, _)) in chunk.iter().enumerate() {
                    if site == i {
                        inject(ins, paulis, 1 << lane, f);
                    }
                }
            });
            let xor = |ms: &[u32]| ms.iter().fold(0u64, |a, &m| a ^ frame.meas[m as usize]);
            let mut fired: Vec<Vec<u32>> = vec![Vec::new(); chunk.len()];
            for (k, det) in circuit.detectors.iter().enumerate() {
                let w = xor(&det.measurements);
                for (lane, f) in fired.iter_mut().enumerate() {
                    if (w >> lane) & 1 == 1 {
                        f.push(k as u32);
                    }
                }
            }
            let label = xor(&circuit.label.measurements);
            for (lane, dets) in fired.into_iter().enumerate() {
                let flips = if (label >> lane) & 1 == 1 { obs } else { 0 };
                acc.add(dets, flips, chunk[lane].2);
            }
        }
        acc.finish(circuit.detector_events())
    }

    /// Code-capacity model: one depolarizing layer of strength `p` on the
    /// data qubits and a single perfect readout (`t = 1`). Detector `k` is
    /// stabilizer `k`.
    pub fn perfect(layout: &CodeLayout, p: f64) -> Self {
        let detectors = layout
            .stabilizers
            .iter()
            .map(|s| DetectorEvent::new(s.pauli_type, s.ancilla, 1))
            .collect();
        let mut acc = Accumulator::default();
        for q in 0..layout.num_data() {
            for pauli in 1..4u8 {
                let (has_x, has_z) = (pauli & 1 != 0, pauli & 2 != 0);
                let dets = layout
                    .stabilizers
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.support.contains(&q))
                    .filter(|(_, s)| match s.pauli_type {
                        PauliType::Z => has_x,
                        PauliType::X => has_z,
                    })
                    .map(|(k, _)| k as u32)
                    .collect();
                let mut obs = 0;
                if has_x && layout.logical_z.contains(&q) {
                    obs |= OBS_Z;
                }
                if has_z && layout.logical_x.contains(&q) {
                    obs |= OBS_X;
                }
                acc.add(dets, obs, p / 3.0);
            }
        }
        acc.finish(detectors)
    }

    /// Expected first-order probability of each detector firing.
    pub fn detector_marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.detectors.len()];
        for e in &self.entries {
            for &d in &e.detectors {
                m[d as usize] = xor_combine(m[d as usize], e.probability);
            }
        }
        m
    }

    /// Text dump: one `error(p) D.. L..` line per entry after one
    /// `detector(x, y, t) D.. type` line per detector.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, d) in self.detectors.iter().enumerate() {
            let _ = writeln!(
                out,
                "detector({}, {}, {}) D{k} {}",
                f64::from(d.x2) / 2.0,
                f64::from(d.y2) / 2.0,
                d.t,
                d.kind
            );
        }
        for e in &self.entries {
            let _ = write!(out, "error({:.6e})", e.probability);
            for d in &e.detectors {
                let _ = write!(out, " D{d}");
            }
            if e.observables & OBS_Z != 0 {
                let _ = write!(out, " LZ");
            }
            if e.observables & OBS_X != 0 {
                let _ = write!(out, " LX");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_memory_circuit, Basis, NoiseParams};

    #[test]
    fn noiseless_dem_empty() {
        let layout = CodeLayout::rotated_surface(3).unwrap();
        let c = build_memory_circuit(&layout, 2, Basis::Z, &NoiseParams::none()).unwrap();
        assert!(DetectorErrorModel::from_circuit(&c).entries.is_empty());
    }

    #[test]
    fn repetition_entries_are_graphlike() {
        let layout = CodeLayout::repetition(3).unwrap();
        let c = build_memory_circuit(&layout, 1, Basis::Z, &NoiseParams::uniform(0.01).unwrap())
            .unwrap();
        let dem = DetectorErrorModel::from_circuit(&c);
        assert!(!dem.entries.is_empty());
        for e in &dem.entries {
            assert!(matches!(e.detectors.len(), 1 | 2), "{e:?}");
            assert!(e.probability > 0.0 && e.probability < 1.0);
        }
    }

    #[test]
    fn merge_rule() {
        assert!((xor_combine(0.01, 0.01) - 0.0198).abs() < 1e-15);
    }

    #[test]
    fn perfect_model_shape() {
        let layout = CodeLayout::rotated_surface(3).unwrap();
        let dem = DetectorErrorModel::perfect(&layout, 0.1);
        assert_eq!(dem.detectors.len(), 8);
        // Every Y error touches both detector types or a logical.
        assert!(dem.entries.iter().all(|e| !e.detectors.is_empty()));
        assert!(dem.to_text().contains("error("));
    }
}
