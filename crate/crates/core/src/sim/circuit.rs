use crate::error::{Error, Result};
use crate::geometry::{corner_order, CodeKind, CodeLayout, PauliType};
use crate::sim::{Basis, DataPoint, DetectorEvent, Labels, MeasurementRecord, NoiseParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Instruction {
    H(u32),
    Cnot { control: u32, target: u32 },
    /// Z-basis measurement; appends one entry to the measurement record.
    Measure(u32),
    Reset(u32),
    Depolarize1 { qubit: u32, p: f64 },
    Depolarize2 { a: u32, b: u32, p: f64 },
    FlipMeasure { qubit: u32, p: f64 },
    FlipReset { qubit: u32, p: f64 },
    BitFlip { qubit: u32, p: f64 },
    Tick,
}

impl Instruction {
    /// Probability of a noise instruction, `None` for gates.
    pub fn noise_probability(&self) -> Option<f64> {
        match *self {
            Instruction::Depolarize1 { p, .. }
            | Instruction::Depolarize2 { p, .. }
            | Instruction::FlipMeasure { p, .. }
            | Instruction::FlipReset { p, .. }
            | Instruction::BitFlip { p, .. } => Some(p),
            _ => None,
        }
    }
}

/// XOR of the listed measurements; deterministic (zero) without noise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorDef {
    pub measurements: Vec<u32>,
    pub event: DetectorEvent,
}

/// XOR of the listed measurements is the flip of `observable`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelDef {
    pub measurements: Vec<u32>,
    pub observable: PauliType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub kind: CodeKind,
    pub distance: usize,
    pub rounds: usize,
    pub basis: Basis,
    pub num_qubits: usize,
    pub num_measurements: usize,
    pub instructions: Vec<Instruction>,
    pub detectors: Vec<DetectorDef>,
    pub label: LabelDef,
    /// `ancilla_measurements[r][s]`: record index of stabilizer `s` in round `r + 1`.
    pub ancilla_measurements: Vec<Vec<u32>>,
    /// Record index of the final readout of each data qubit.
    pub data_measurements: Vec<u32>,
}

impl Circuit {
    /// Detectors and label implied by a measurement-flip record.
    pub fn data_point(&self, record: &MeasurementRecord) -> DataPoint {
        let parity = |ms: &[u32]| ms.iter().fold(false, |acc, &m| acc ^ record.get(m as usize));
        let detectors = self
            .detectors
            .iter()
            .filter(|d| parity(&d.measurements))
            .map(|d| d.event)
            .collect();
        let flip = parity(&self.label.measurements);
        let labels = match self.label.observable {
            PauliType::Z => Labels::z(flip),
            PauliType::X => Labels::x(flip),
        };
        DataPoint { detectors, labels }
    }

    pub fn detector_events(&self) -> Vec<DetectorEvent> {
        self.detectors.iter().map(|d| d.event).collect()
    }

    /// Indices of instructions that carry noise with nonzero probability.
    pub fn noise_sites(&self) -> impl Iterator<Item = (usize, &Instruction)> {
        self.instructions
            .iter()
            .enumerate()
            .filter(|(_, ins)| ins.noise_probability().is_some_and(|p| p > 0.0))
    }
}

/// Builds a memory experiment: data initialisation in `basis`, `rounds`
/// rounds of ancilla-mediated stabilizer measurement, and a transversal
/// data readout.
///
/// Each round starts with idle noise on the data, resets the ancillas,
/// runs the four-step CNOT schedule (X checks are wrapped in Hadamards on
/// the ancilla) and measures every ancilla.
pub fn build_memory_circuit(
    layout: &CodeLayout,
    rounds: usize,
    basis: Basis,
    noise: &NoiseParams,
) -> Result<Circuit> {
    if rounds < 1 {
        return Err(Error::Validation("number of rounds must be >= 1".into()));
    }
    if layout.kind == CodeKind::Repetition && basis == Basis::X {
        return Err(Error::Validation(
            "memory-X is undefined for the repetition code (it cannot detect phase flips)".into(),
        ));
    }
    let violations = layout.validate();
    if !violations.is_empty() {
        return Err(Error::Validation(format!("invalid layout: {}", violations[0])));
    }
    noise.validate()?;

    let n = layout.num_data() as u32;
    let anc = |s: usize| n + s as u32;
    let schedule = cnot_schedule(layout);
    let x_ancillas: Vec<u32> = layout.stabilizers_of(PauliType::X).map(|(s, _)| anc(s)).collect();

    let mut ins = Vec::new();
    let mut num_measurements = 0u32;
    let mut measure = |ins: &mut Vec<Instruction>, q: u32, p: f64| {
        ins.push(Instruction::FlipMeasure { qubit: q, p });
        ins.push(Instruction::Measure(q));
        num_measurements += 1;
        num_measurements - 1
    };

    for q in 0..n {
        ins.push(Instruction::Reset(q));
        ins.push(Instruction::FlipReset { qubit: q, p: noise.reset_flip });
        if basis == Basis::X {
            ins.push(Instruction::H(q));
            ins.push(Instruction::Depolarize1 { qubit: q, p: noise.gate1 });
        }
    }

    let mut ancilla_measurements = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        ins.push(Instruction::Tick);
        for q in 0..n {
            ins.push(Instruction::Depolarize1 { qubit: q, p: noise.data_depolarize });
            ins.push(Instruction::BitFlip { qubit: q, p: noise.data_bit_flip });
        }
        for s in 0..layout.num_stabilizers() {
            ins.push(Instruction::Reset(anc(s)));
            ins.push(Instruction::FlipReset { qubit: anc(s), p: noise.reset_flip });
        }
        for &a in &x_ancillas {
            ins.push(Instruction::H(a));
            ins.push(Instruction::Depolarize1 { qubit: a, p: noise.gate1 });
        }
        for step in &schedule {
            for &(s, q) in step {
                let (control, target) = match layout.stabilizers[s].pauli_type {
                    PauliType::Z => (q as u32, anc(s)),
                    PauliType::X => (anc(s), q as u32),
                };
                ins.push(Instruction::Cnot { control, target });
                ins.push(Instruction::Depolarize2 { a: control, b: target, p: noise.gate2 });
            }
        }
        for &a in &x_ancillas {
            ins.push(Instruction::H(a));
            ins.push(Instruction::Depolarize1 { qubit: a, p: noise.gate1 });
        }
        let round: Vec<u32> = (0..layout.num_stabilizers())
            .map(|s| measure(&mut ins, anc(s), noise.measure_flip))
            .collect();
        ancilla_measurements.push(round);
    }

    ins.push(Instruction::Tick);
    if basis == Basis::X {
        for q in 0..n {
            ins.push(Instruction::H(q));
            ins.push(Instruction::Depolarize1 { qubit: q, p: noise.gate1 });
        }
    }
    let data_measurements: Vec<u32> =
        (0..n).map(|q| measure(&mut ins, q, noise.measure_flip)).collect();

    let aligned = basis.aligned();
    let mut detectors = Vec::new();
    for r in 0..rounds {
        for (s, stab) in layout.stabilizers.iter().enumerate() {
            let current = ancilla_measurements[r][s];
            let measurements = match (r, stab.pauli_type == aligned) {
                (0, true) => vec![current],
                (0, false) => continue,
                _ => vec![current, ancilla_measurements[r - 1][s]],
            };
            detectors.push(DetectorDef {
                measurements,
                event: DetectorEvent::new(stab.pauli_type, stab.ancilla, r as u32 + 1),
            });
        }
    }
    for stab in layout.stabilizers.iter().filter(|s| s.pauli_type == aligned) {
        let s = layout.stabilizer_at(stab.ancilla).unwrap();
        let mut measurements = vec![ancilla_measurements[rounds - 1][s]];
        measurements.extend(stab.support.iter().map(|&q| data_measurements[q]));
        detectors.push(DetectorDef {
            measurements,
            event: DetectorEvent::new(stab.pauli_type, stab.ancilla, rounds as u32 + 1),
        });
    }

    let label = LabelDef {
        measurements: layout.logical(aligned).iter().map(|&q| data_measurements[q]).collect(),
        observable: aligned,
    };

    Ok(Circuit {
        kind: layout.kind,
        distance: layout.distance,
        rounds,
        basis,
        num_qubits: layout.num_data() + layout.num_stabilizers(),
        num_measurements: num_measurements as usize,
        instructions: ins,
        detectors,
        label,
        ancilla_measurements,
        data_measurements,
    })
}

/// Four layers of (stabilizer, data qubit) pairs; no qubit appears twice in a layer.
fn cnot_schedule(layout: &CodeLayout) -> Vec<Vec<(usize, usize)>> {
    let d = layout.distance as i32;
    match layout.kind {
        CodeKind::Repetition => (0..2)
            .map(|k| {
                layout
                    .stabilizers
                    .iter()
                    .enumerate()
                    .map(|(s, st)| (s, st.support[k]))
                    .collect()
            })
            .collect(),
        CodeKind::RotatedSurface => (0..4)
            .map(|k| {
                let mut layer = Vec::new();
                for (s, st) in layout.stabilizers.iter().enumerate() {
                    let i = (st.ancilla.x2 - 1).div_euclid(2);
                    let j = (st.ancilla.y2 - 1).div_euclid(2);
                    let (dx, dy) = corner_order(st.pauli_type)[k];
                    let (x, y) = (i + dx, j + dy);
                    if (0..d).contains(&x) && (0..d).contains(&y) {
                        layer.push((s, (y * d + x) as usize));
                    }
                }
                layer
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn schedule_has_no_conflicts() {
        for d in [3, 5, 7] {
            let layout = CodeLayout::rotated_surface(d).unwrap();
            let schedule = cnot_schedule(&layout);
            let mut touched = 0;
            for layer in &schedule {
                let qs: HashSet<usize> = layer.iter().map(|&(_, q)| q).collect();
                assert_eq!(qs.len(), layer.len());
                touched += layer.len();
            }
            let total: usize = layout.stabilizers.iter().map(|s| s.support.len()).sum();
            assert_eq!(touched, total);
        }
    }

    #[test]
    fn detector_round_counts() {
        let layout = CodeLayout::rotated_surface(3).unwrap();
        let c = build_memory_circuit(&layout, 2, Basis::Z, &NoiseParams::none()).unwrap();
        let rounds = |t: PauliType| {
            c.detectors
                .iter()
                .filter(|d| d.event.kind == t)
                .map(|d| d.event.t)
                .collect::<HashSet<_>>()
        };
        assert_eq!(rounds(PauliType::Z), HashSet::from([1, 2, 3]));
        assert_eq!(rounds(PauliType::X), HashSet::from([2]));
        assert_eq!(c.detectors.len(), 4 * 3 + 4);
    }

    #[test]
    fn rejects_bad_arguments() {
        let rep = CodeLayout::repetition(3).unwrap();
        assert!(build_memory_circuit(&rep, 0, Basis::Z, &NoiseParams::none()).is_err());
        assert!(build_memory_circuit(&rep, 2, Basis::X, &NoiseParams::none()).is_err());
        let bad = NoiseParams { gate2: 1.0, ..NoiseParams::none() };
        assert!(build_memory_circuit(&rep, 2, Basis::Z, &bad).is_err());
    }

    #[test]
    fn references_exist() {
        let layout = CodeLayout::rotated_surface(5).unwrap();
        let c = build_memory_circuit(&layout, 3, Basis::X, &NoiseParams::uniform(0.01).unwrap())
            .unwrap();
        for d in &c.detectors {
            assert!(d.measurements.iter().all(|&m| (m as usize) < c.num_measurements));
        }
        assert_eq!(c.label.measurements.len(), 5);
    }
}
