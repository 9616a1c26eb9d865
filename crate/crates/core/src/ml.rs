//! Exact maximum-likelihood decoding for small surface codes with perfect
//! stabilizer readout, by enumerating every Pauli error on the data qubits.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeLayout, PauliType};
use crate::sim::DataPoint;

/// Largest distance accepted by the enumerating decoder.
pub const MAX_DISTANCE: usize = 3;

/// Logical class of an error relative to the identity coset.
///
/// The derived ordering `I < X < Z < Y` is the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogicalClass {
    I,
    X,
    Z,
    Y,
}

impl LogicalClass {
    pub const ALL: [LogicalClass; 4] = [LogicalClass::I, LogicalClass::X, LogicalClass::Z, LogicalClass::Y];

    /// `λ_Z` set means Z_L was flipped (an X-type logical).
    pub fn from_flips(lambda_z: bool, lambda_x: bool) -> Self {
        match (lambda_z, lambda_x) {
            (false, false) => LogicalClass::I,
            (true, false) => LogicalClass::X,
            (false, true) => LogicalClass::Z,
            (true, true) => LogicalClass::Y,
        }
    }

    /// `(λ_Z, λ_X)`.
    pub fn flips(self) -> (bool, bool) {
        match self {
            LogicalClass::I => (false, false),
            LogicalClass::X => (true, false),
            LogicalClass::Z => (false, true),
            LogicalClass::Y => (true, true),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LogicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Joint probability of a syndrome and each logical class.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CosetProbabilities {
    pub i: f64,
    pub x: f64,
    pub z: f64,
    pub y: f64,
}

impl CosetProbabilities {
    fn from_array(a: [f64; 4]) -> Self {
        Self { i: a[0], x: a[1], z: a[2], y: a[3] }
    }

    pub fn get(&self, c: LogicalClass) -> f64 {
        match c {
            LogicalClass::I => self.i,
            LogicalClass::X => self.x,
            LogicalClass::Z => self.z,
            LogicalClass::Y => self.y,
        }
    }

    /// Probability of the syndrome itself.
    pub fn total(&self) -> f64 {
        self.i + self.x + self.z + self.y
    }

    /// Conditional class probabilities given the syndrome.
    pub fn normalized(&self) -> Self {
        let t = self.total();
        if t == 0.0 {
            return Self::default();
        }
        Self { i: self.i / t, x: self.x / t, z: self.z / t, y: self.y / t }
    }

    /// Most likely class; ties go to the earliest in `I, X, Z, Y`.
    pub fn argmax(&self) -> LogicalClass {
        let mut best = LogicalClass::I;
        for c in LogicalClass::ALL {
            if self.get(c) > self.get(best) {
                best = c;
            }
        }
        best
    }
}

/// Coset probabilities for every syndrome of a layout at one error rate.
#[derive(Clone, Debug)]
pub struct CosetTable {
    pub p: f64,
    num_stabilizers: usize,
    table: Vec<[f64; 4]>,
}

fn mask_of(support: &[usize]) -> u32 {
    support.iter().fold(0, |m, &q| m | 1 << q)
}

fn parity(v: u32) -> bool {
    v.count_ones() & 1 == 1
}

impl CosetTable {
    /// Enumerates all `4^n` errors under depolarizing noise of strength `p`.
    pub fn new(layout: &CodeLayout, p: f64) -> Result<Self> {
        if layout.kind != CodeKind::RotatedSurface {
            return Err(Error::Validation("maximum-likelihood decoding needs a surface layout".into()));
        }
        if layout.distance > MAX_DISTANCE {
            return Err(Error::Validation(format!(
                "maximum-likelihood enumeration is limited to d <= {MAX_DISTANCE}, got {}",
                layout.distance
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("p must lie in [0, 1], got {p}")));
        }
        let n = layout.num_data();
        let stabs: Vec<(PauliType, u32)> =
            layout.stabilizers.iter().map(|s| (s.pauli_type, mask_of(&s.support))).collect();
        let lz = mask_of(&layout.logical_z);
        let lx = mask_of(&layout.logical_x);
        let weight_prob: Vec<f64> =
            (0..=n).map(|w| (p / 3.0).powi(w as i32) * (1.0 - p).powi((n - w) as i32)).collect();

        // Syndrome bits contributed by X and by Z components, per component value.
        let span = 1u32 << n;
        let mut syn_x = vec![0u32; span as usize];
        let mut syn_z = vec![0u32; span as usize];
        for e in 0..span {
            for (k, &(t, m)) in stabs.iter().enumerate() {
                let fired = parity(e & m);
                match t {
                    PauliType::Z => syn_x[e as usize] |= u32::from(fired) << k,
                    PauliType::X => syn_z[e as usize] |= u32::from(fired) << k,
                }
            }
        }

        let mut table = vec![[0.0; 4]; 1 << stabs.len()];
        for ex in 0..span {
            let flip_z = parity(ex & lz);
            for ez in 0..span {
                let w = (ex | ez).count_ones() as usize;
                let s = (syn_x[ex as usize] | syn_z[ez as usize]) as usize;
                let class = LogicalClass::from_flips(flip_z, parity(ez & lx));
                table[s][class.index()] += weight_prob[w];
            }
        }
        Ok(Self { p, num_stabilizers: stabs.len(), table })
    }

    pub fn num_syndromes(&self) -> usize {
        self.table.len()
    }

    pub fn probabilities(&self, syndrome: usize) -> CosetProbabilities {
        CosetProbabilities::from_array(self.table[syndrome])
    }

    pub fn decode(&self, syndrome: usize) -> LogicalClass {
        self.probabilities(syndrome).argmax()
    }

    /// Expected failure rate of maximum-likelihood decoding.
    pub fn ml_failure_rate(&self) -> f64 {
        (0..self.num_syndromes())
            .map(|s| {
                let c = self.probabilities(s);
                c.total() - c.get(c.argmax())
            })
            .sum()
    }

    /// Expected failure rate of an arbitrary syndrome-to-class rule.
    pub fn failure_rate_of(&self, mut rule: impl FnMut(usize) -> LogicalClass) -> f64 {
        (0..self.num_syndromes())
            .map(|s| {
                let c = self.probabilities(s);
                c.total() - c.get(rule(s))
            })
            .sum()
    }

    /// Syndrome index of a perfect-stabilizer data point.
    pub fn syndrome_of(&self, layout: &CodeLayout, point: &DataPoint) -> Result<usize> {
        syndrome_index(layout, point).and_then(|s| {
            if s < self.num_syndromes() && layout.num_stabilizers() == self.num_stabilizers {
                Ok(s)
            } else {
                Err(Error::Shape("syndrome does not fit this table".into()))
            }
        })
    }
}

/// Bit `k` set when stabilizer `k` fired.
pub fn syndrome_index(layout: &CodeLayout, point: &DataPoint) -> Result<usize> {
    let mut s = 0usize;
    for d in &point.detectors {
        let k = layout
            .stabilizer_at(d.coord())
            .ok_or_else(|| Error::Validation(format!("no stabilizer at {:?}", d.coord())))?;
        if layout.stabilizers[k].pauli_type != d.kind {
            return Err(Error::Validation("detector type does not match its stabilizer".into()));
        }
        s ^= 1 << k;
    }
    Ok(s)
}

fn syndrome_from_bits(bits: &[bool]) -> usize {
    bits.iter().enumerate().fold(0, |s, (k, &b)| s | usize::from(b) << k)
}

/// Coset probabilities for one syndrome (one bool per stabilizer).
pub fn coset_probabilities(layout: &CodeLayout, syndrome: &[bool], p: f64) -> Result<CosetProbabilities> {
    if syndrome.len() != layout.num_stabilizers() {
        return Err(Error::Shape(format!(
            "syndrome has {} bits, layout has {} stabilizers",
            syndrome.len(),
            layout.num_stabilizers()
        )));
    }
    Ok(CosetTable::new(layout, p)?.probabilities(syndrome_from_bits(syndrome)))
}

pub fn ml_decode(layout: &CodeLayout, syndrome: &[bool], p: f64) -> Result<LogicalClass> {
    Ok(coset_probabilities(layout, syndrome, p)?.argmax())
}
