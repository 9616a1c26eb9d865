//! Bit-packed Pauli-frame simulation.
//!
//! A frame stores, per qubit, one `u64` word of X-flips and one of Z-flips;
//! bit `k` of every word belongs to lane `k`. A lane is one shot when
//! sampling and one injected fault when enumerating. Gates act on whole
//! words: H swaps the X and Z words, CNOT copies X forward and Z backward.
//! A Z-basis measurement reports the X word of its qubit.

use rand::Rng as _;
use rayon::prelude::*;

use crate::rng::{self, Rng};
use crate::sim::{Circuit, DataPoint, Instruction};

pub(crate) const LANES: usize = 64;

/// Per-lane Pauli frame plus measurement-flip words.
pub(crate) struct Frame {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
    pub meas: Vec<u64>,
}

impl Frame {
    fn new(num_qubits: usize, num_measurements: usize) -> Self {
        Self {
            x: vec![0; num_qubits],
            z: vec![0; num_qubits],
            meas: Vec::with_capacity(num_measurements),
        }
    }

    /// Applies a two-bit Pauli code (bit 0 = X, bit 1 = Z) on the lanes in `mask`.
    #[inline]
    pub fn apply(&mut self, qubit: u32, pauli: u8, mask: u64) {
        let q = qubit as usize;
        if pauli & 1 != 0 {
            self.x[q] ^= mask;
        }
        if pauli & 2 != 0 {
            self.z[q] ^= mask;
        }
    }
}

/// Runs the circuit, delegating every noise instruction to `noise`.
pub(crate) fn run<F>(circuit: &Circuit, mut noise: F) -> Frame
where
    F: FnMut(usize, &Instruction, &mut Frame),
{
    let mut f = Frame::new(circuit.num_qubits, circuit.num_measurements);
    for (i, ins) in circuit.instructions.iter().enumerate() {
        match *ins {
            Instruction::H(q) => {
                let q = q as usize;
                std::mem::swap(&mut f.x[q], &mut f.z[q]);
            }
            Instruction::Cnot { control, target } => {
                let (c, t) = (control as usize, target as usize);
                f.x[t] ^= f.x[c];
                f.z[c] ^= f.z[t];
            }
            Instruction::Measure(q) => f.meas.push(f.x[q as usize]),
            Instruction::Reset(q) => {
                f.x[q as usize] = 0;
                f.z[q as usize] = 0;
            }
            Instruction::Tick => {}
            _ => noise(i, ins, &mut f),
        }
    }
    f
}

/// Word whose bits below `lanes` are independently set with probability `p`.
fn bernoulli_word(rng: &mut Rng, p: f64, lanes: usize) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    let mut word = 0u64;
    if p < 0.05 {
        // Geometric gaps between successes.
        let log_q = (-p).ln_1p();
        let mut k = 0usize;
        loop {
            let u: f64 = rng.random();
            let gap = ((1.0 - u).ln() / log_q).floor();
            if gap >= (lanes - k) as f64 {
                break;
            }
            k += gap as usize;
            word |= 1 << k;
            k += 1;
            if k >= lanes {
                break;
            }
        }
    } else {
        let threshold = (p * 2f64.powi(64)) as u64;
        for k in 0..lanes {
            if rng.random::<u64>() < threshold {
                word |= 1 << k;
            }
        }
    }
    word
}

fn random_noise(rng: &mut Rng, lanes: usize, ins: &Instruction, f: &mut Frame) {
    match *ins {
        Instruction::Depolarize1 { qubit, p } => {
            let mut hits = bernoulli_word(rng, p, lanes);
            while hits != 0 {
                let bit = hits & hits.wrapping_neg();
                hits ^= bit;
                f.apply(qubit, rng.random_range(1..4u8), bit);
            }
        }
        Instruction::Depolarize2 { a, b, p } => {
            let mut hits = bernoulli_word(rng, p, lanes);
            while hits != 0 {
                let bit = hits & hits.wrapping_neg();
                hits ^= bit;
                let r = rng.random_range(1..16u8);
                f.apply(a, r & 3, bit);
                f.apply(b, r >> 2, bit);
            }
        }
        Instruction::FlipMeasure { qubit, p }
        | Instruction::FlipReset { qubit, p }
        | Instruction::BitFlip { qubit, p } => {
            let hits = bernoulli_word(rng, p, lanes);
            f.x[qubit as usize] ^= hits;
        }
        _ => unreachable!("not a noise instruction"),
    }
}

/// Measurement flips of one shot relative to the noiseless reference.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementRecord {
    bits: Vec<u64>,
    len: usize,
}

impl MeasurementRecord {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.bits[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % 64);
        if v {
            self.bits[i / 64] |= mask;
        } else {
            self.bits[i / 64] &= !mask;
        }
    }

    fn from_lane(meas: &[u64], lane: usize) -> Self {
        let mut r = Self::zeros(meas.len());
        for (i, w) in meas.iter().enumerate() {
            if (w >> lane) & 1 == 1 {
                r.set(i, true);
            }
        }
        r
    }
}

fn sample_chunk(circuit: &Circuit, seed: u64, chunk: u64) -> Frame {
    let mut rng = rng::stream(seed, chunk);
    run(circuit, |_, ins, f| random_noise(&mut rng, LANES, ins, f))
}

/// Measurement-flip records for `shots` shots.
///
/// Shots are simulated 64 at a time; chunk `k` draws from stream `k` of
/// `seed`, so the result is independent of the thread count.
pub fn sample_records(circuit: &Circuit, seed: u64, shots: usize) -> Vec<MeasurementRecord> {
    let chunks = shots.div_ceil(LANES);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|k| {
            let lanes = (shots - k * LANES).min(LANES);
            let frame = sample_chunk(circuit, seed, k as u64);
            (0..lanes)
                .map(|lane| MeasurementRecord::from_lane(&frame.meas, lane))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Samples `shots` data points (same shot stream as [`sample_records`]).
pub fn sample_batch(circuit: &Circuit, seed: u64, shots: usize) -> Vec<DataPoint> {
    let chunks = shots.div_ceil(LANES);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|k| {
            let lanes = (shots - k * LANES).min(LANES);
            let frame = sample_chunk(circuit, seed, k as u64);
            points_from_words(circuit, &frame.meas, lanes)
        })
        .collect()
}

/// Samples one shot; equal to the first shot of [`sample_batch`] with the same seed.
pub fn sample(circuit: &Circuit, seed: u64) -> DataPoint {
    let frame = sample_chunk(circuit, seed, 0);
    points_from_words(circuit, &frame.meas, 1).pop().unwrap()
}

fn points_from_words(circuit: &Circuit, meas: &[u64], lanes: usize) -> Vec<DataPoint> {
    let xor = |ms: &[u32]| ms.iter().fold(0u64, |acc, &m| acc ^ meas[m as usize]);
    let mut points: Vec<DataPoint> = vec![DataPoint::default(); lanes];
    for det in &circuit.detectors {
        let mut word = xor(&det.measurements);
        while word != 0 {
            let lane = word.trailing_zeros() as usize;
            word &= word - 1;
            if lane < lanes {
                points[lane].detectors.push(det.event);
            }
        }
    }
    let label = xor(&circuit.label.measurements);
    for (lane, p) in points.iter_mut().enumerate() {
        let flip = (label >> lane) & 1 == 1;
        p.labels = match circuit.label.observable {
            crate::geometry::PauliType::Z => crate::sim::Labels::z(flip),
            crate::geometry::PauliType::X => crate::sim::Labels::x(flip),
        };
    }
    points
}

/// A Pauli applied at a noise instruction. `paulis[k]` is the two-bit
/// code (bit 0 = X, bit 1 = Z) for the instruction's `k`-th target; flip
/// instructions only use the X bit of target 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fault {
    pub instruction: usize,
    pub paulis: [u8; 2],
}

impl Fault {
    pub fn single(instruction: usize, pauli: u8) -> Self {
        Self { instruction, paulis: [pauli, 0] }
    }
}

pub(crate) fn inject(ins: &Instruction, paulis: [u8; 2], mask: u64, f: &mut Frame) {
    match *ins {
        Instruction::Depolarize1 { qubit, .. } => f.apply(qubit, paulis[0], mask),
        Instruction::Depolarize2 { a, b, .. } => {
            f.apply(a, paulis[0], mask);
            f.apply(b, paulis[1], mask);
        }
        Instruction::FlipMeasure { qubit, .. }
        | Instruction::FlipReset { qubit, .. }
        | Instruction::BitFlip { qubit, .. } => f.apply(qubit, paulis[0] & 1, mask),
        _ => {}
    }
}

/// Deterministic propagation of the given faults with every other noise
/// site idle.
pub fn propagate(circuit: &Circuit, faults: &[Fault]) -> MeasurementRecord {
    let frame = run(circuit, |i, ins, f| {
        for fault in faults.iter().filter(|fl| fl.instruction == i) {
            inject(ins, fault.paulis, 1, f);
        }
    });
    MeasurementRecord::from_lane(&frame.meas, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CodeLayout;
    use crate::sim::{build_memory_circuit, Basis, NoiseParams};

    #[test]
    fn bernoulli_rate() {
        let mut rng = rng::stream(7, 0);
        for p in [0.001, 0.01, 0.1, 0.5] {
            let trials = 20_000;
            let ones: u32 = (0..trials).map(|_| bernoulli_word(&mut rng, p, 64).count_ones()).sum();
            let n = (trials * 64) as f64;
            let mean = f64::from(ones) / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            assert!((mean - p).abs() < 4.0 * sigma, "p={p} mean={mean}");
        }
        assert_eq!(bernoulli_word(&mut rng, 0.5, 3) >> 3, 0);
    }

    #[test]
    fn noiseless_is_silent() {
        let layout = CodeLayout::rotated_surface(3).unwrap();
        let c = build_memory_circuit(&layout, 3, Basis::Z, &NoiseParams::none()).unwrap();
        for p in sample_batch(&c, 1, 200) {
            assert!(p.detectors.is_empty());
            assert_eq!(p.labels.z, Some(false));
        }
    }

    #[test]
    fn single_shot_matches_batch() {
        let layout = CodeLayout::rotated_surface(3).unwrap();
        let c = build_memory_circuit(&layout, 2, Basis::Z, &NoiseParams::uniform(0.05).unwrap())
            .unwrap();
        for seed in 0..20 {
            assert_eq!(sample(&c, seed), sample_batch(&c, seed, 1)[0]);
        }
    }

    #[test]
    fn records_and_points_agree() {
        let layout = CodeLayout::rotated_surface(3).unwrap();
        let c = build_memory_circuit(&layout, 3, Basis::X, &NoiseParams::uniform(0.02).unwrap())
            .unwrap();
        let records = sample_records(&c, 11, 130);
        let points = sample_batch(&c, 11, 130);
        for (r, p) in records.iter().zip(&points) {
            assert_eq!(&c.data_point(r), p);
        }
    }
}
