//! Detector graphs: one node per fired detector, edges weighted by the
//! inverse square sup-norm distance, node degree capped.

use crate::error::{Error, Result};
use crate::geometry::PauliType;
use crate::sim::{DataPoint, DetectorEvent, Labels};

/// Maximum node degree kept by [`build_graph`].
pub const MAX_DEGREE: usize = 6;

/// Which coordinates make up a node's feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// `(b1, b2, x, y, t)`, surface code under circuit-level noise.
    Circuit,
    /// `(b1, b2, x, y)`, surface code with perfect stabilizers.
    Perfect,
    /// `(x, t)`, repetition code.
    Repetition,
}

impl FeatureMode {
    pub fn width(self) -> usize {
        match self {
            FeatureMode::Circuit => 5,
            FeatureMode::Perfect => 4,
            FeatureMode::Repetition => 2,
        }
    }

    pub fn to_u8(self) -> u8 {
        match self {
            FeatureMode::Circuit => 0,
            FeatureMode::Perfect => 1,
            FeatureMode::Repetition => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FeatureMode::Circuit),
            1 => Some(FeatureMode::Perfect),
            2 => Some(FeatureMode::Repetition),
            _ => None,
        }
    }

    fn uses_y(self) -> bool {
        self != FeatureMode::Repetition
    }

    fn uses_t(self) -> bool {
        self != FeatureMode::Perfect
    }

    /// Node features; `(1, 0)` one-hot marks an X check, `(0, 1)` a Z check.
    pub fn features(self, d: &DetectorEvent) -> Vec<f64> {
        let (x, y, t) = (f64::from(d.x2) / 2.0, f64::from(d.y2) / 2.0, f64::from(d.t));
        let (b1, b2) = match d.kind {
            PauliType::X => (1.0, 0.0),
            PauliType::Z => (0.0, 1.0),
        };
        match self {
            FeatureMode::Circuit => vec![b1, b2, x, y, t],
            FeatureMode::Perfect => vec![b1, b2, x, y],
            FeatureMode::Repetition => vec![x, t],
        }
    }

    /// Sup-norm distance in half-grid units, over the coordinates this mode uses.
    pub fn sup_distance2(self, a: &DetectorEvent, b: &DetectorEvent) -> u32 {
        let mut m = a.x2.abs_diff(b.x2);
        if self.uses_y() {
            m = m.max(a.y2.abs_diff(b.y2));
        }
        if self.uses_t() {
            m = m.max(2 * a.t.abs_diff(b.t));
        }
        m
    }
}

/// `e = (max |Δ|)^-2` in grid units. Coincident nodes are an error.
pub fn edge_weight(mode: FeatureMode, a: &DetectorEvent, b: &DetectorEvent) -> Result<f64> {
    let d2 = mode.sup_distance2(a, b);
    if d2 == 0 {
        return Err(Error::CoincidentDetectors);
    }
    Ok(weight_from_distance2(d2))
}

fn weight_from_distance2(d2: u32) -> f64 {
    let d2 = f64::from(d2);
    4.0 / (d2 * d2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorGraph {
    pub mode: FeatureMode,
    pub nodes: Vec<DetectorEvent>,
    /// Undirected edges with `a < b`.
    pub edges: Vec<Edge>,
    pub labels: Labels,
}

impl DetectorGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| self.mode.features(n)).collect()
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut nodes = self.nodes.clone();
        for (i, &p) in perm.iter().enumerate() {
            nodes[p] = self.nodes[i];
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (perm[e.a], perm[e.b]);
                Edge { a: a.min(b), b: a.max(b), weight: e.weight }
            })
            .collect();
        Self { mode: self.mode, nodes, edges, labels: self.labels }
    }
}

/// Builds the degree-capped detector graph of one shot.
///
/// Candidate edges of the complete graph are visited by decreasing weight;
/// an edge is kept only if both endpoints still have degree below
/// [`MAX_DEGREE`]. Equal weights are ordered by the pair of canonical node
/// ranks (detectors sorted by type, position and round), so the result does
/// not depend on the input order of the detectors.
pub fn build_graph(point: &DataPoint, mode: FeatureMode) -> DetectorGraph {
    let nodes = point.detectors.clone();
    let n = nodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| nodes[i]);
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    // (distance, rank pair) sorts heaviest first, then lexicographically.
    let mut candidates: Vec<(u32, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2 = mode.sup_distance2(&nodes[i], &nodes[j]);
            debug_assert!(d2 > 0, "duplicate detectors in one shot");
            let (ri, rj) = (rank[i], rank[j]);
            candidates.push((d2, ri.min(rj), ri.max(rj)));
        }
    }
    candidates.sort_unstable();

    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for (d2, ra, rb) in candidates {
        let (a, b) = (order[ra], order[rb]);
        if degree[a] < MAX_DEGREE && degree[b] < MAX_DEGREE {
            degree[a] += 1;
            degree[b] += 1;
            edges.push(Edge { a: a.min(b), b: a.max(b), weight: weight_from_distance2(d2) });
        }
    }
    DetectorGraph { mode, nodes, edges, labels: point.labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(kind: PauliType, x2: i32, y2: i32, t: u32) -> DetectorEvent {
        DetectorEvent { kind, x2, y2, t }
    }

    #[test]
    fn weights() {
        let m = FeatureMode::Circuit;
        let a = ev(PauliType::Z, 2, 2, 1);
        let b = ev(PauliType::Z, 2, 4, 3);
        assert_eq!(edge_weight(m, &a, &b).unwrap(), 0.25);
        let c = ev(PauliType::Z, 1, 2, 1);
        assert_eq!(edge_weight(m, &c, &a).unwrap(), 4.0);
        assert!(matches!(edge_weight(m, &a, &a), Err(Error::CoincidentDetectors)));
        // Perfect mode ignores t, repetition mode ignores y.
        let p1 = ev(PauliType::X, 1, 1, 1);
        let p2 = ev(PauliType::X, 3, 1, 9);
        assert_eq!(edge_weight(FeatureMode::Perfect, &p1, &p2).unwrap(), 1.0);
        let r1 = ev(PauliType::Z, 1, 0, 1);
        let r2 = ev(PauliType::Z, 1, 0, 2);
        assert_eq!(edge_weight(FeatureMode::Repetition, &r1, &r2).unwrap(), 1.0);
    }

    #[test]
    fn small_graphs() {
        let empty = build_graph(&DataPoint::default(), FeatureMode::Circuit);
        assert_eq!((empty.num_nodes(), empty.edges.len()), (0, 0));
        let two = DataPoint {
            detectors: vec![ev(PauliType::Z, 2, 2, 1), ev(PauliType::Z, 2, 4, 3)],
            labels: Labels::z(true),
        };
        let g = build_graph(&two, FeatureMode::Circuit);
        assert_eq!(g.edges, vec![Edge { a: 0, b: 1, weight: 0.25 }]);
        assert_eq!(g.labels, Labels::z(true));
    }

    #[test]
    fn features_per_mode() {
        let d = ev(PauliType::X, 3, -1, 2);
        assert_eq!(FeatureMode::Circuit.features(&d), vec![1.0, 0.0, 1.5, -0.5, 2.0]);
        assert_eq!(FeatureMode::Perfect.features(&d), vec![1.0, 0.0, 1.5, -0.5]);
        assert_eq!(FeatureMode::Repetition.features(&d), vec![1.5, 2.0]);
    }
}
