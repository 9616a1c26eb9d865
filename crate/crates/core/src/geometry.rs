//! Code layouts for the repetition code and the rotated surface code.
//!
//! Data qubits sit on integer grid points and ancillas (stabilizer centres)
//! on half-integer points. Every coordinate is stored doubled so that
//! half-integers stay exact: a data qubit at `(x, y)` is stored as
//! `(2x, 2y)`, an ancilla at `(x + 0.5, y + 0.5)` as `(2x + 1, 2y + 1)`.
//!
//! Orientation of the rotated surface code (row `y = 0` is the north edge):
//!
//! * `logical_z` is the row `y = 0`,
//! * `logical_x` is the column `x = 0`,
//! * weight-2 Z stabilizers sit on the west/east edges, weight-2 X
//!   stabilizers on the north/south edges.

use std::fmt;

use crate::error::{Error, Result};

/// Pauli flavour of a stabilizer or detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliType {
    X,
    Z,
}

impl PauliType {
    pub fn other(self) -> Self {
        match self {
            PauliType::X => PauliType::Z,
            PauliType::Z => PauliType::X,
        }
    }

    pub fn to_u8(self) -> u8 {
        match self {
            PauliType::X => 0,
            PauliType::Z => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(PauliType::X),
            1 => Some(PauliType::Z),
            _ => None,
        }
    }
}

impl fmt::Display for PauliType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PauliType::X => f.write_str("X"),
            PauliType::Z => f.write_str("Z"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodeKind {
    Repetition,
    RotatedSurface,
}

impl CodeKind {
    pub fn to_u8(self) -> u8 {
        match self {
            CodeKind::Repetition => 0,
            CodeKind::RotatedSurface => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(CodeKind::Repetition),
            1 => Some(CodeKind::RotatedSurface),
            _ => None,
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeKind::Repetition => f.write_str("rep"),
            CodeKind::RotatedSurface => f.write_str("surface"),
        }
    }
}

/// Planar coordinate in half-grid units (both components doubled).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub x2: i32,
    pub y2: i32,
}

impl Coord {
    pub const fn new(x2: i32, y2: i32) -> Self {
        Self { x2, y2 }
    }

    pub fn x(self) -> f64 {
        f64::from(self.x2) / 2.0
    }

    pub fn y(self) -> f64 {
        f64::from(self.y2) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerDef {
    pub pauli_type: PauliType,
    /// Data-qubit indices, listed in the order the extraction circuit touches them.
    pub support: Vec<usize>,
    pub ancilla: Coord,
}

/// A code instance: data qubits, stabilizer generators and logical operators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeLayout {
    pub kind: CodeKind,
    pub distance: usize,
    pub data_qubits: Vec<Coord>,
    pub stabilizers: Vec<StabilizerDef>,
    pub logical_z: Vec<usize>,
    pub logical_x: Vec<usize>,
}

/// Same-type plaquette position just outside the lattice. Matching chains
/// may terminate there; `flips_logical` marks the side where terminating
/// crosses the logical operator measured by detectors of that type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VirtualBoundary {
    pub coord: Coord,
    pub flips_logical: bool,
}

/// One broken layout invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    StabilizerCount { expected: usize, found: usize },
    TypeSplit { x: usize, z: usize },
    StabilizerWeight { stabilizer: usize, weight: usize },
    RepetitionType { stabilizer: usize },
    DuplicateAncilla { a: usize, b: usize },
    SupportOutOfRange { stabilizer: usize, qubit: usize },
    Anticommuting { a: usize, b: usize },
    LogicalAnticommutes { logical: PauliType, stabilizer: usize },
    LogicalsCommute,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StabilizerCount { expected, found } => {
                write!(f, "expected {expected} stabilizers, found {found}")
            }
            Violation::TypeSplit { x, z } => write!(f, "uneven split: {x} X-type, {z} Z-type"),
            Violation::StabilizerWeight { stabilizer, weight } => {
                write!(f, "stabilizer {stabilizer} has weight {weight}")
            }
            Violation::RepetitionType { stabilizer } => {
                write!(f, "repetition stabilizer {stabilizer} is not Z-type")
            }
            Violation::DuplicateAncilla { a, b } => {
                write!(f, "stabilizers {a} and {b} share an ancilla coordinate")
            }
            Violation::SupportOutOfRange { stabilizer, qubit } => {
                write!(f, "stabilizer {stabilizer} references missing qubit {qubit}")
            }
            Violation::Anticommuting { a, b } => write!(f, "stabilizers {a} and {b} anticommute"),
            Violation::LogicalAnticommutes { logical, stabilizer } => {
                write!(f, "logical {logical} anticommutes with stabilizer {stabilizer}")
            }
            Violation::LogicalsCommute => f.write_str("logical X and logical Z commute"),
        }
    }
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|q| b.contains(q)).count()
}

/// Whether two Pauli strings of the given flavours commute.
pub fn commutes(a_type: PauliType, a: &[usize], b_type: PauliType, b: &[usize]) -> bool {
    a_type == b_type || overlap(a, b) % 2 == 0
}

impl CodeLayout {
    /// Rotated surface code on a `d × d` grid, `d` odd and at least 3.
    pub fn rotated_surface(d: usize) -> Result<Self> {
        if d < 3 || d % 2 == 0 {
            return Err(Error::Validation(format!(
                "rotated surface code distance must be odd and >= 3, got {d}"
            )));
        }
        let di = d as i32;
        let data_qubits: Vec<Coord> = (0..di)
            .flat_map(|y| (0..di).map(move |x| Coord::new(2 * x, 2 * y)))
            .collect();
        let index = |x: i32, y: i32| -> Option<usize> {
            (0..di).contains(&x).then_some(())?;
            (0..di).contains(&y).then_some(())?;
            Some((y * di + x) as usize)
        };

        let mut stabilizers = Vec::with_capacity(d * d - 1);
        for j in -1..di {
            for i in -1..di {
                let pauli_type = plaquette_type(i, j);
                let bulk = (0..di - 1).contains(&i) && (0..di - 1).contains(&j);
                let keep = bulk || is_boundary_slot(i, j, di, pauli_type);
                if !keep {
                    continue;
                }
                // Corners in circuit order.
                let corners = corner_order(pauli_type);
                let support: Vec<usize> = corners
                    .iter()
                    .filter_map(|&(dx, dy)| index(i + dx, j + dy))
                    .collect();
                stabilizers.push(StabilizerDef {
                    pauli_type,
                    support,
                    ancilla: Coord::new(2 * i + 1, 2 * j + 1),
                });
            }
        }

        let logical_z = (0..di).map(|x| index(x, 0).unwrap()).collect();
        let logical_x = (0..di).map(|y| index(0, y).unwrap()).collect();
        Ok(Self {
            kind: CodeKind::RotatedSurface,
            distance: d,
            data_qubits,
            stabilizers,
            logical_z,
            logical_x,
        })
    }

    /// Repetition code with `d` data qubits on a line and `d - 1` ZZ checks.
    pub fn repetition(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Validation(format!(
                "repetition code distance must be >= 2, got {d}"
            )));
        }
        let data_qubits = (0..d as i32).map(|x| Coord::new(2 * x, 0)).collect();
        let stabilizers = (0..d - 1)
            .map(|i| StabilizerDef {
                pauli_type: PauliType::Z,
                support: vec![i, i + 1],
                ancilla: Coord::new(2 * i as i32 + 1, 0),
            })
            .collect();
        Ok(Self {
            kind: CodeKind::Repetition,
            distance: d,
            data_qubits,
            stabilizers,
            logical_z: vec![0],
            logical_x: (0..d).collect(),
        })
    }

    pub fn num_data(&self) -> usize {
        self.data_qubits.len()
    }

    pub fn num_stabilizers(&self) -> usize {
        self.stabilizers.len()
    }

    pub fn logical(&self, t: PauliType) -> &[usize] {
        match t {
            PauliType::X => &self.logical_x,
            PauliType::Z => &self.logical_z,
        }
    }

    pub fn stabilizers_of(&self, t: PauliType) -> impl Iterator<Item = (usize, &StabilizerDef)> {
        self.stabilizers
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.pauli_type == t)
    }

    pub fn stabilizer_at(&self, ancilla: Coord) -> Option<usize> {
        self.stabilizers.iter().position(|s| s.ancilla == ancilla)
    }

    /// Virtual same-type plaquettes just outside the lattice, where matching
    /// chains of errors detected by `t`-type stabilizers can end.
    pub fn virtual_boundaries(&self, t: PauliType) -> Vec<VirtualBoundary> {
        let di = self.distance as i32;
        match self.kind {
            CodeKind::Repetition => {
                if t == PauliType::X {
                    return Vec::new();
                }
                vec![
                    VirtualBoundary { coord: Coord::new(-1, 0), flips_logical: true },
                    VirtualBoundary { coord: Coord::new(2 * di - 1, 0), flips_logical: false },
                ]
            }
            CodeKind::RotatedSurface => {
                let mut out = Vec::new();
                for j in -1..di {
                    for i in -1..di {
                        let on_rim = i == -1 || j == -1 || i == di - 1 || j == di - 1;
                        if !on_rim || plaquette_type(i, j) != t {
                            continue;
                        }
                        if self.stabilizer_at(Coord::new(2 * i + 1, 2 * j + 1)).is_some() {
                            continue;
                        }
                        // Z-type chains (X errors) end north/south and cross
                        // logical_z on the north side; X-type chains end
                        // west/east and cross logical_x on the west side.
                        let flips_logical = match t {
                            PauliType::Z => j == -1,
                            PauliType::X => i == -1,
                        };
                        out.push(VirtualBoundary {
                            coord: Coord::new(2 * i + 1, 2 * j + 1),
                            flips_logical,
                        });
                    }
                }
                out
            }
        }
    }

    /// Smallest and largest doubled coordinates a detector can take.
    pub fn footprint(&self) -> (Coord, Coord) {
        let xs = self.stabilizers.iter().map(|s| s.ancilla.x2);
        let ys = self.stabilizers.iter().map(|s| s.ancilla.y2);
        let (min_x, max_x) = xs.fold((i32::MAX, i32::MIN), |(a, b), v| (a.min(v), b.max(v)));
        let (min_y, max_y) = ys.fold((i32::MAX, i32::MIN), |(a, b), v| (a.min(v), b.max(v)));
        (Coord::new(min_x, min_y), Coord::new(max_x, max_y))
    }

    /// Every broken invariant; empty when the layout is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let d = self.distance;
        let n = self.data_qubits.len();
        let n_x = self.stabilizers_of(PauliType::X).count();
        let n_z = self.stabilizers_of(PauliType::Z).count();

        match self.kind {
            CodeKind::RotatedSurface => {
                if self.stabilizers.len() != d * d - 1 {
                    out.push(Violation::StabilizerCount {
                        expected: d * d - 1,
                        found: self.stabilizers.len(),
                    });
                }
                if n_x != n_z {
                    out.push(Violation::TypeSplit { x: n_x, z: n_z });
                }
                for (i, s) in self.stabilizers.iter().enumerate() {
                    if !matches!(s.support.len(), 2 | 4) {
                        out.push(Violation::StabilizerWeight { stabilizer: i, weight: s.support.len() });
                    }
                }
            }
            CodeKind::Repetition => {
                if self.stabilizers.len() != d.saturating_sub(1) {
                    out.push(Violation::StabilizerCount {
                        expected: d.saturating_sub(1),
                        found: self.stabilizers.len(),
                    });
                }
                for (i, s) in self.stabilizers.iter().enumerate() {
                    if s.pauli_type != PauliType::Z {
                        out.push(Violation::RepetitionType { stabilizer: i });
                    }
                    if s.support.len() != 2 {
                        out.push(Violation::StabilizerWeight { stabilizer: i, weight: s.support.len() });
                    }
                }
            }
        }

        for (i, s) in self.stabilizers.iter().enumerate() {
            if let Some(&q) = s.support.iter().find(|&&q| q >= n) {
                out.push(Violation::SupportOutOfRange { stabilizer: i, qubit: q });
            }
        }

        for a in 0..self.stabilizers.len() {
            for b in a + 1..self.stabilizers.len() {
                let (sa, sb) = (&self.stabilizers[a], &self.stabilizers[b]);
                if sa.ancilla == sb.ancilla {
                    out.push(Violation::DuplicateAncilla { a, b });
                }
                if !commutes(sa.pauli_type, &sa.support, sb.pauli_type, &sb.support) {
                    out.push(Violation::Anticommuting { a, b });
                }
            }
        }

        for logical in [PauliType::Z, PauliType::X] {
            let support = self.logical(logical);
            for (i, s) in self.stabilizers.iter().enumerate() {
                if !commutes(logical, support, s.pauli_type, &s.support) {
                    out.push(Violation::LogicalAnticommutes { logical, stabilizer: i });
                }
            }
        }
        if commutes(PauliType::Z, &self.logical_z, PauliType::X, &self.logical_x) {
            out.push(Violation::LogicalsCommute);
        }
        out
    }
}

/// Checkerboard colouring of plaquette `(i, j)` (centre at `(i + 0.5, j + 0.5)`).
fn plaquette_type(i: i32, j: i32) -> PauliType {
    if (i + j).rem_euclid(2) == 1 {
        PauliType::Z
    } else {
        PauliType::X
    }
}

fn is_boundary_slot(i: i32, j: i32, di: i32, t: PauliType) -> bool {
    let west_east = (i == -1 || i == di - 1) && (0..di - 1).contains(&j);
    let north_south = (j == -1 || j == di - 1) && (0..di - 1).contains(&i);
    match t {
        PauliType::Z => west_east,
        PauliType::X => north_south,
    }
}

/// Corner offsets `(dx, dy)` from plaquette `(i, j)` in gate order.
///
/// Z checks go NW, NE, SW, SE; X checks go NW, SW, NE, SE. Every data qubit
/// is touched by at most one check per step, and X/Z neighbours visit their
/// two shared qubits in the same relative order, so the checks commute
/// through the schedule.
pub(crate) fn corner_order(t: PauliType) -> [(i32, i32); 4] {
    match t {
        PauliType::Z => [(0, 0), (0, 1), (1, 0), (1, 1)],
        PauliType::X => [(0, 0), (1, 0), (0, 1), (1, 1)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_counts() {
        for d in [3, 5, 7, 9, 11] {
            let l = CodeLayout::rotated_surface(d).unwrap();
            assert_eq!(l.num_data(), d * d);
            assert_eq!(l.num_stabilizers(), d * d - 1);
            assert_eq!(l.stabilizers_of(PauliType::Z).count(), (d * d - 1) / 2);
            assert!(l.validate().is_empty(), "d={d}: {:?}", l.validate());
        }
        let l = CodeLayout::rotated_surface(3).unwrap();
        assert_eq!(l.logical_z.len(), 3);
        assert_eq!(l.logical_x.len(), 3);
    }

    #[test]
    fn surface_rejects_bad_distance() {
        assert!(CodeLayout::rotated_surface(4).is_err());
        assert!(CodeLayout::rotated_surface(1).is_err());
    }

    #[test]
    fn repetition_counts() {
        let l = CodeLayout::repetition(3).unwrap();
        let pairs: Vec<_> = l.stabilizers.iter().map(|s| s.support.clone()).collect();
        assert_eq!(pairs, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(CodeLayout::repetition(25).unwrap().num_stabilizers(), 24);
        assert_eq!(CodeLayout::repetition(2).unwrap().num_stabilizers(), 1);
        assert!(CodeLayout::repetition(1).is_err());
        assert!(CodeLayout::repetition(7).unwrap().validate().is_empty());
    }

    #[test]
    fn broken_commutation_is_reported() {
        let mut l = CodeLayout::rotated_surface(3).unwrap();
        let (xi, _) = l.stabilizers_of(PauliType::X).next().unwrap();
        let (zi, _) = l
            .stabilizers_of(PauliType::Z)
            .find(|(_, z)| overlap(&z.support, &l.stabilizers[xi].support) == 2)
            .unwrap();
        let shared = l.stabilizers[zi]
            .support
            .iter()
            .copied()
            .find(|q| l.stabilizers[xi].support.contains(q))
            .unwrap();
        l.stabilizers[xi].support.retain(|&q| q != shared);
        let v: Vec<_> = l
            .validate()
            .into_iter()
            .filter(|v| matches!(v, Violation::Anticommuting { .. }))
            .collect();
        assert_eq!(v, vec![Violation::Anticommuting { a: xi.min(zi), b: xi.max(zi) }]);
    }

    #[test]
    fn commuting_logicals_reported() {
        let mut l = CodeLayout::rotated_surface(3).unwrap();
        // Overlap {1, 4}: even, so the pair commutes.
        l.logical_x = vec![1, 4, 7];
        l.logical_z = vec![0, 1, 2, 3, 4, 5];
        let v = l.validate();
        assert!(v.contains(&Violation::LogicalsCommute), "{v:?}");
    }

    #[test]
    fn commutation_symmetric() {
        let l = CodeLayout::rotated_surface(5).unwrap();
        for a in &l.stabilizers {
            for b in &l.stabilizers {
                assert_eq!(
                    commutes(a.pauli_type, &a.support, b.pauli_type, &b.support),
                    commutes(b.pauli_type, &b.support, a.pauli_type, &a.support)
                );
            }
        }
    }

    #[test]
    fn boundaries_for_d3() {
        let l = CodeLayout::rotated_surface(3).unwrap();
        let z = l.virtual_boundaries(PauliType::Z);
        assert!(z.iter().any(|b| b.flips_logical));
        assert!(z.iter().any(|b| !b.flips_logical));
        for b in &z {
            assert!(b.coord.y2 == -1 || b.coord.y2 == 5);
        }
        let x = l.virtual_boundaries(PauliType::X);
        for b in &x {
            assert!(b.coord.x2 == -1 || b.coord.x2 == 5);
        }
    }
}
