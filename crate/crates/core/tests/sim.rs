use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qecw::sim::{
    build_memory_circuit, propagate, sample, sample_batch, sample_perfect_batch, Circuit, DetectorErrorModel, Fault,
    Instruction, NoiseParams, PauliError,
};
use qecw::{Basis, CodeLayout, DataPoint, Labels, PauliType};

/// Dense real state vector; enough for Clifford circuits up to global phase.
struct StateVector {
    amp: Vec<f64>,
    rng: ChaCha8Rng,
}

impl StateVector {
    fn new(n: usize, seed: u64) -> Self {
        let mut amp = vec![0.0; 1 << n];
        amp[0] = 1.0;
        Self { amp, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn x(&mut self, q: u32) {
        let b = 1usize << q;
        for i in 0..self.amp.len() {
            if i & b == 0 {
                self.amp.swap(i, i | b);
            }
        }
    }

    fn z(&mut self, q: u32) {
        let b = 1usize << q;
        for (i, a) in self.amp.iter_mut().enumerate() {
            if i & b != 0 {
                *a = -*a;
            }
        }
    }

    fn h(&mut self, q: u32) {
        let b = 1usize << q;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amp.len() {
            if i & b == 0 {
                let (u, v) = (self.amp[i], self.amp[i | b]);
                self.amp[i] = s * (u + v);
                self.amp[i | b] = s * (u - v);
            }
        }
    }

    fn cnot(&mut self, c: u32, t: u32) {
        let (cb, tb) = (1usize << c, 1usize << t);
        for i in 0..self.amp.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amp.swap(i, i | tb);
            }
        }
    }

    fn measure(&mut self, q: u32) -> bool {
        let b = 1usize << q;
        let p1: f64 = self.amp.iter().enumerate().filter(|(i, _)| i & b != 0).map(|(_, a)| a * a).sum();
        let one = if p1 < 1e-9 {
            false
        } else if p1 > 1.0 - 1e-9 {
            true
        } else {
            self.rng.random::<f64>() < p1
        };
        let norm = if one { p1 } else { 1.0 - p1 }.sqrt();
        for (i, a) in self.amp.iter_mut().enumerate() {
            if (i & b != 0) != one {
                *a = 0.0;
            } else {
                *a /= norm;
            }
        }
        one
    }

    fn pauli(&mut self, q: u32, code: u8) {
        if code & 1 != 0 {
            self.x(q);
        }
        if code & 2 != 0 {
            self.z(q);
        }
    }
}

/// Runs the circuit on a state vector with `faults` applied at their noise
/// sites and returns the absolute measurement outcomes.
fn run_state_vector(c: &Circuit, faults: &[Fault], seed: u64) -> Vec<bool> {
    let mut sv = StateVector::new(c.num_qubits, seed);
    let mut out = Vec::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        for f in faults.iter().filter(|f| f.instruction == i) {
            match *ins {
                Instruction::Depolarize1 { qubit, .. } => sv.pauli(qubit, f.paulis[0]),
                Instruction::Depolarize2 { a, b, .. } => {
                    sv.pauli(a, f.paulis[0]);
                    sv.pauli(b, f.paulis[1]);
                }
                Instruction::FlipMeasure { qubit, .. }
                | Instruction::FlipReset { qubit, .. }
                | Instruction::BitFlip { qubit, .. } => sv.pauli(qubit, 1),
                _ => {}
            }
        }
        match *ins {
            Instruction::H(q) => sv.h(q),
            Instruction::Cnot { control, target } => sv.cnot(control, target),
            Instruction::Measure(q) => out.push(sv.measure(q)),
            Instruction::Reset(q) => {
                if sv.measure(q) {
                    sv.x(q);
                }
            }
            _ => {}
        }
    }
    out
}

fn point_from_outcomes(c: &Circuit, m: &[bool]) -> DataPoint {
    let parity = |ms: &[u32]| ms.iter().fold(false, |a, &i| a ^ m[i as usize]);
    let detectors = c.detectors.iter().filter(|d| parity(&d.measurements)).map(|d| d.event).collect();
    let flip = parity(&c.label.measurements);
    let labels = match c.label.observable {
        PauliType::Z => Labels::z(flip),
        PauliType::X => Labels::x(flip),
    };
    DataPoint { detectors, labels }
}

fn all_faults(c: &Circuit) -> Vec<Fault> {
    let mut out = Vec::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        match ins {
            Instruction::Depolarize1 { .. } => out.extend((1..4).map(|p| Fault::single(i, p))),
            Instruction::Depolarize2 { .. } => {
                for k in 1..16u8 {
                    out.push(Fault { instruction: i, paulis: [k & 3, k >> 2] });
                }
            }
            Instruction::FlipMeasure { .. } | Instruction::FlipReset { .. } | Instruction::BitFlip { .. } => {
                out.push(Fault::single(i, 1))
            }
            _ => {}
        }
    }
    out
}

fn noisy(layout: &CodeLayout, rounds: usize, basis: Basis) -> Circuit {
    let mut n = NoiseParams::uniform(0.01).unwrap();
    n.data_bit_flip = 0.01;
    build_memory_circuit(layout, rounds, basis, &n).unwrap()
}

#[test]
fn frame_matches_state_vector_repetition_all_faults() {
    let c = noisy(&CodeLayout::repetition(3).unwrap(), 2, Basis::Z);
    let faults = all_faults(&c);
    assert!(faults.len() > 100);
    for f in &faults {
        let expect = point_from_outcomes(&c, &run_state_vector(&c, &[*f], 5));
        assert_eq!(c.data_point(&propagate(&c, &[*f])), expect, "fault {f:?}");
    }
}

#[test]
fn frame_matches_state_vector_surface_sampled_faults() {
    for basis in [Basis::Z, Basis::X] {
        let c = noisy(&CodeLayout::rotated_surface(3).unwrap(), 2, basis);
        assert_eq!(c.num_qubits, 17);
        let faults = all_faults(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..40 {
            let f = faults[rng.random_range(0..faults.len())];
            // Random first-round outcomes must not leak into detectors.
            let expect = point_from_outcomes(&c, &run_state_vector(&c, &[f], k));
            assert_eq!(c.data_point(&propagate(&c, &[f])), expect, "{basis:?} fault {f:?}");
        }
        let quiet = point_from_outcomes(&c, &run_state_vector(&c, &[], 99));
        assert!(quiet.detectors.is_empty());
    }
}

#[test]
fn bulk_bit_flip_between_rounds() {
    let c = build_memory_circuit(&CodeLayout::repetition(3).unwrap(), 3, Basis::Z, &NoiseParams::data_bit_flip(0.1).unwrap())
        .unwrap();
    // Second bit-flip site on data qubit 1 sits at the start of round 2.
    let site = c
        .instructions
        .iter()
        .enumerate()
        .filter(|(_, ins)| matches!(ins, Instruction::BitFlip { qubit: 1, .. }))
        .nth(1)
        .unwrap()
        .0;
    let p = c.data_point(&propagate(&c, &[Fault::single(site, 1)]));
    let got: Vec<(i32, u32)> = p.detectors.iter().map(|d| (d.x2, d.t)).collect();
    assert_eq!(got, vec![(1, 2), (3, 2)]);
    assert_eq!(p.labels, Labels::z(false));
}

#[test]
fn zero_noise_is_silent() {
    for (layout, basis) in [
        (CodeLayout::repetition(3).unwrap(), Basis::Z),
        (CodeLayout::rotated_surface(3).unwrap(), Basis::X),
        (CodeLayout::rotated_surface(5).unwrap(), Basis::Z),
    ] {
        let c = build_memory_circuit(&layout, 2, basis, &NoiseParams::none()).unwrap();
        assert!(sample_batch(&c, 4, 500).iter().all(|p| p.detectors.is_empty() && p.labels.count() == 1
            && p.labels.head(0).unwrap_or(false) == false
            && p.labels.head(1).unwrap_or(false) == false));
    }
    let l = CodeLayout::rotated_surface(3).unwrap();
    assert!(sample_perfect_batch(&l, 0.0, 1, 200).unwrap().iter().all(|p| *p == DataPoint {
        detectors: vec![],
        labels: Labels::both(false, false)
    }));
}

#[test]
fn detector_round_counts() {
    let c = build_memory_circuit(&CodeLayout::rotated_surface(3).unwrap(), 2, Basis::Z, &NoiseParams::none()).unwrap();
    let rounds = |t: PauliType| {
        let mut ts: Vec<u32> = c.detectors.iter().filter(|d| d.event.kind == t).map(|d| d.event.t).collect();
        ts.sort();
        ts.dedup();
        ts.len()
    };
    assert_eq!(rounds(PauliType::Z), 3);
    assert_eq!(rounds(PauliType::X), 1);
}

#[test]
fn detector_marginals_match_first_order_model() {
    let c = build_memory_circuit(&CodeLayout::rotated_surface(3).unwrap(), 2, Basis::Z, &NoiseParams::uniform(2e-3).unwrap())
        .unwrap();
    let dem = DetectorErrorModel::from_circuit(&c);
    let marginals = dem.detector_marginals();
    let shots = 200_000;
    let points = sample_batch(&c, 8, shots);
    let events = c.detector_events();
    let mut counts = vec![0usize; events.len()];
    for p in &points {
        for d in &p.detectors {
            counts[events.iter().position(|e| e == d).unwrap()] += 1;
        }
    }
    for (k, &q) in marginals.iter().enumerate() {
        let sigma = (q * (1.0 - q) / shots as f64).sqrt();
        let rate = counts[k] as f64 / shots as f64;
        assert!((rate - q).abs() < 3.0 * sigma, "detector {k}: sampled {rate}, model {q}");
    }
    // Undecoded label flips: independent mechanisms give (1 - prod(1 - 2q)) / 2.
    let flip_prob = 0.5 * (1.0 - dem.entries.iter().filter(|e| e.observables != 0).map(|e| 1.0 - 2.0 * e.probability).product::<f64>());
    let flips = points.iter().filter(|p| p.labels.z == Some(true)).count() as f64 / shots as f64;
    let sigma = (flip_prob * (1.0 - flip_prob) / shots as f64).sqrt();
    assert!((flips - flip_prob).abs() < 4.0 * sigma, "label flips {flips} vs {flip_prob}");
}

#[test]
fn repetition_dem_is_graphlike() {
    let c = build_memory_circuit(&CodeLayout::repetition(3).unwrap(), 1, Basis::Z, &NoiseParams::uniform(1e-3).unwrap())
        .unwrap();
    let dem = DetectorErrorModel::from_circuit(&c);
    assert!(!dem.entries.is_empty());
    assert!(dem.entries.iter().all(|e| (1..=2).contains(&e.detectors.len())));
    let quiet = build_memory_circuit(&CodeLayout::repetition(3).unwrap(), 1, Basis::Z, &NoiseParams::none()).unwrap();
    assert!(DetectorErrorModel::from_circuit(&quiet).entries.is_empty());
}

#[test]
fn perfect_sampler_mean_detectors_match_enumeration() {
    let l = CodeLayout::rotated_surface(3).unwrap();
    let p = 0.1;
    let n = l.num_data();
    let mut expected = 0.0;
    for code in 0..(1u64 << (2 * n)) {
        let mut e = PauliError::identity(n);
        let mut weight = 0;
        for q in 0..n {
            let c = (code >> (2 * q)) & 3;
            e.x[q] = c & 1 != 0;
            e.z[q] = c & 2 != 0;
            weight += usize::from(c != 0);
        }
        let prob = (p / 3.0f64).powi(weight as i32) * (1.0 - p).powi((n - weight) as i32);
        expected += prob * e.syndrome(&l).iter().filter(|&&s| s).count() as f64;
    }
    let shots = 100_000;
    let pts = sample_perfect_batch(&l, p, 21, shots).unwrap();
    let counts: Vec<f64> = pts.iter().map(|p| p.detectors.len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / shots as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / shots as f64;
    let sigma = (var / shots as f64).sqrt();
    assert!((mean - expected).abs() < 4.0 * sigma, "mean {mean} expected {expected}");
}

#[test]
fn single_shot_sampling_is_deterministic() {
    let c = noisy(&CodeLayout::rotated_surface(3).unwrap(), 3, Basis::Z);
    for seed in 0..20 {
        assert_eq!(sample(&c, seed), sample(&c, seed));
        assert_eq!(sample(&c, seed), sample_batch(&c, seed, 3)[0]);
    }
    let long = sample_batch(&c, 7, 150);
    assert_eq!(sample_batch(&c, 7, 70), long[..70]);
}

fn xor_points(a: &DataPoint, b: &DataPoint) -> Vec<qecw::DetectorEvent> {
    let mut out: Vec<_> = a.detectors.iter().filter(|d| !b.detectors.contains(d)).copied().collect();
    out.extend(b.detectors.iter().filter(|d| !a.detectors.contains(d)).copied());
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_compose_linearly(i in 0usize..10_000, j in 0usize..10_000) {
        let c = noisy(&CodeLayout::rotated_surface(3).unwrap(), 2, Basis::Z);
        let faults = all_faults(&c);
        let (f1, f2) = (faults[i % faults.len()], faults[j % faults.len()]);
        prop_assume!(f1.instruction != f2.instruction);
        let a = c.data_point(&propagate(&c, &[f1]));
        let b = c.data_point(&propagate(&c, &[f2]));
        let both = c.data_point(&propagate(&c, &[f1, f2]));
        let mut joint = both.detectors.clone();
        joint.sort();
        prop_assert_eq!(joint, xor_points(&a, &b));
        prop_assert_eq!(both.labels.z.unwrap(), a.labels.z.unwrap() ^ b.labels.z.unwrap());
    }

    #[test]
    fn batch_is_deterministic(seed in any::<u64>(), shots in 1usize..200) {
        let c = noisy(&CodeLayout::repetition(5).unwrap(), 3, Basis::Z);
        prop_assert_eq!(sample_batch(&c, seed, shots), sample_batch(&c, seed, shots));
    }
}
