//! Minimum-weight perfect matching decoders.
//!
//! A [`MatchingGraph`] holds the detectors of one stabilizer type, weighted
//! edges between them, and edges to a virtual boundary. Decoding computes
//! shortest paths between the fired detectors, then solves the matching
//! exactly on a graph with one boundary copy per fired detector (the copies
//! are joined to each other at zero cost, so any number of detectors can
//! end on the boundary).

mod blossom;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

pub use blossom::max_weight_matching;

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeLayout, PauliType};
use crate::sim::dem::{observable_bit, xor_combine, DetectorErrorModel};
use crate::sim::{DataPoint, DetectorEvent};

/// Edge of a matching graph; `b == None` is an edge to the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchEdge {
    pub a: usize,
    pub b: Option<usize>,
    pub weight: f64,
    /// Whether an error along this edge flips the logical label.
    pub flip: bool,
}

#[derive(Clone, Debug, Default)]
pub struct MatchingGraph {
    pub nodes: Vec<DetectorEvent>,
    pub edges: Vec<MatchEdge>,
    /// Notes about clamped weights.
    pub warnings: Vec<String>,
    index: HashMap<DetectorEvent, usize>,
}

/// Shortest-path data between the fired detectors of one decode call.
#[derive(Clone, Debug)]
pub struct PathTable {
    /// `dist[i][j]` between fired detectors `i` and `j` (infinite if disconnected).
    pub dist: Vec<Vec<f64>>,
    pub flip: Vec<Vec<bool>>,
    /// Distance from each fired detector to the boundary.
    pub boundary: Vec<f64>,
    pub boundary_flip: Vec<bool>,
}

/// Outcome of [`MatchingGraph::decode`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    /// Predicted logical flip: XOR of the flips along every matched path.
    pub flip: bool,
    pub weight: f64,
    /// Pairs of fired-detector positions; `None` marks the boundary.
    pub pairs: Vec<(usize, Option<usize>)>,
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `ln((1 - q) / q)`, clamped to zero when `q >= 0.5`.
pub fn log_likelihood_weight(q: f64) -> (f64, Option<String>) {
    if q >= 0.5 {
        (0.0, Some(format!("edge probability {q} >= 0.5, weight clamped to 0")))
    } else {
        (((1.0 - q) / q).ln(), None)
    }
}

impl MatchingGraph {
    pub fn new(nodes: Vec<DetectorEvent>) -> Self {
        let index = nodes.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Self { nodes, edges: Vec::new(), warnings: Vec::new(), index }
    }

    pub fn add_edge(&mut self, a: usize, b: Option<usize>, weight: f64, flip: bool) -> Result<()> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Validation(format!("edge weight must be finite and >= 0, got {weight}")));
        }
        if a >= self.nodes.len() || b.is_some_and(|b| b >= self.nodes.len() || b == a) {
            return Err(Error::Validation(format!("bad edge endpoints {a}, {b:?}")));
        }
        self.edges.push(MatchEdge { a, b, weight, flip });
        Ok(())
    }

    pub fn node_index(&self, d: &DetectorEvent) -> Option<usize> {
        self.index.get(d).copied()
    }

    fn adjacency(&self) -> Vec<Vec<(Option<usize>, f64, bool)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight, e.flip));
            if let Some(b) = e.b {
                adj[b].push((Some(e.a), e.weight, e.flip));
            }
        }
        adj
    }

    /// Dijkstra from each fired node. The boundary is a sink: paths may
    /// end there but never pass through it.
    pub fn shortest_paths(&self, fired: &[usize]) -> PathTable {
        let adj = self.adjacency();
        let n = self.nodes.len();
        let k = fired.len();
        let mut table = PathTable {
            dist: vec![vec![f64::INFINITY; k]; k],
            flip: vec![vec![false; k]; k],
            boundary: vec![f64::INFINITY; k],
            boundary_flip: vec![false; k],
        };
        let mut dist = vec![f64::INFINITY; n];
        let mut parity = vec![false; n];
        for (s, &src) in fired.iter().enumerate() {
            dist.fill(f64::INFINITY);
            dist[src] = 0.0;
            parity[src] = false;
            let mut heap = BinaryHeap::from([Item(0.0, src)]);
            while let Some(Item(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &(v, w, f) in &adj[u] {
                    let nd = d + w;
                    match v {
                        None => {
                            if nd < table.boundary[s] {
                                table.boundary[s] = nd;
                                table.boundary_flip[s] = parity[u] ^ f;
                            }
                        }
                        Some(v) => {
                            if nd < dist[v] {
                                dist[v] = nd;
                                parity[v] = parity[u] ^ f;
                                heap.push(Item(nd, v));
                            }
                        }
                    }
                }
            }
            for (t, &dst) in fired.iter().enumerate() {
                table.dist[s][t] = dist[dst];
                table.flip[s][t] = parity[dst];
            }
        }
        table
    }

    /// Exact minimum-weight matching of the fired detectors.
    pub fn decode(&self, fired: &[DetectorEvent]) -> Result<Matching> {
        let idx = fired
            .iter()
            .map(|d| {
                self.node_index(d)
                    .ok_or_else(|| Error::Validation(format!("detector {d:?} is not in the matching graph")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.decode_indices(&idx)
    }

    pub fn decode_indices(&self, fired: &[usize]) -> Result<Matching> {
        if fired.is_empty() {
            return Ok(Matching::default());
        }
        let table = self.shortest_paths(fired);
        let pairs = match_table(&table.dist, &table.boundary)?;
        let mut m = Matching { pairs, ..Matching::default() };
        for &(a, b) in &m.pairs {
            let (w, f) = match b {
                Some(b) => (table.dist[a][b], table.flip[a][b]),
                None => (table.boundary[a], table.boundary_flip[a]),
            };
            m.weight += w;
            m.flip ^= f;
        }
        Ok(m)
    }
}

/// Solves the reduced problem: `k` nodes with pairwise distances `dist`
/// and boundary distances `boundary`. Every node is paired with another
/// node or with the boundary so the total distance is minimal.
pub fn match_table(dist: &[Vec<f64>], boundary: &[f64]) -> Result<Vec<(usize, Option<usize>)>> {
    let k = boundary.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let max_w = dist
        .iter()
        .flatten()
        .chain(boundary)
        .filter(|w| w.is_finite())
        .fold(0.0f64, |a, &w| a.max(w));
    let scale = if max_w > 0.0 { 1e12 / max_w } else { 1.0 };
    let to_int = |w: f64| (w * scale).round() as i64;
    let top = to_int(max_w) + 1;

    // Nodes 0..k are detectors, k..2k their boundary copies.
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if dist[i][j].is_finite() {
                edges.push((i, j, top - to_int(dist[i][j])));
            }
            edges.push((k + i, k + j, top));
        }
        if boundary[i].is_finite() {
            edges.push((i, k + i, top - to_int(boundary[i])));
        }
    }
    let mate = max_weight_matching(2 * k, &edges, true);
    let mut pairs = Vec::with_capacity(k);
    for i in 0..k {
        match mate[i] {
            Some(j) if j < k => {
                if i < j {
                    pairs.push((i, Some(j)));
                }
            }
            Some(_) => pairs.push((i, None)),
            None => {
                return Err(Error::Infeasible(format!("fired detector {i} cannot be matched")));
            }
        }
    }
    Ok(pairs)
}

/// Splits a set of same-type detectors into time-ordered consecutive pairs;
/// an odd one out goes to the boundary.
fn decompose(mut dets: Vec<usize>, graph: &MatchingGraph) -> Vec<(usize, Option<usize>)> {
    dets.sort_by_key(|&i| (graph.nodes[i].t, graph.nodes[i]));
    let mut out: Vec<(usize, Option<usize>)> = dets.chunks(2).map(|c| (c[0], c.get(1).copied())).collect();
    for e in &mut out {
        if let (a, Some(b)) = *e {
            *e = (a.min(b), Some(a.max(b)));
        }
    }
    out
}

/// Matching graph for detectors of type `kind`, weighted from the error model.
///
/// Each entry is restricted to `kind`; one detector gives a boundary edge,
/// two give an internal edge, more are split into consecutive pairs in time
/// order (the logical flip rides on the first piece). Parallel edges with the
/// same flip merge their probabilities; otherwise the likelier edge is kept.
pub fn build_informed(dem: &DetectorErrorModel, kind: PauliType) -> Result<MatchingGraph> {
    if dem.entries.is_empty() {
        return Err(Error::Validation("detector error model has no entries".into()));
    }
    let global: Vec<usize> = (0..dem.detectors.len()).filter(|&i| dem.detectors[i].kind == kind).collect();
    let mut local = vec![usize::MAX; dem.detectors.len()];
    for (l, &g) in global.iter().enumerate() {
        local[g] = l;
    }
    let mut graph = MatchingGraph::new(global.iter().map(|&g| dem.detectors[g]).collect());
    let obs = observable_bit(kind);
    let mut merged: HashMap<(usize, Option<usize>), (f64, bool)> = HashMap::new();
    let mut order = Vec::new();
    for e in &dem.entries {
        let dets: Vec<usize> =
            e.detectors.iter().map(|&d| local[d as usize]).filter(|&l| l != usize::MAX).collect();
        if dets.is_empty() {
            continue;
        }
        let flip = e.observables & obs != 0;
        for (n, key) in decompose(dets, &graph).into_iter().enumerate() {
            let f = flip && n == 0;
            match merged.get_mut(&key) {
                Some(slot) if slot.1 == f => slot.0 = xor_combine(slot.0, e.probability),
                Some(slot) => {
                    if e.probability > slot.0 {
                        *slot = (e.probability, f);
                    }
                }
                None => {
                    merged.insert(key, (e.probability, f));
                    order.push(key);
                }
            }
        }
    }
    for key in order {
        let (q, f) = merged[&key];
        let (w, warning) = log_likelihood_weight(q);
        if let Some(msg) = warning {
            graph.warnings.push(msg);
        }
        graph.add_edge(key.0, key.1, w, f)?;
    }
    Ok(graph)
}

/// `|Δx| + |Δy| + |Δt|` in grid units.
pub fn one_norm(a: &DetectorEvent, b: &DetectorEvent) -> f64 {
    (f64::from(a.x2.abs_diff(b.x2)) + f64::from(a.y2.abs_diff(b.y2))) / 2.0 + f64::from(a.t.abs_diff(b.t))
}

/// Spatial distances from a detector to the two boundaries its chains can
/// end on, with whether ending there flips the logical. Z-type chains end
/// north (flipping) or south; X-type chains and repetition-code chains end
/// west (flipping) or east.
pub fn boundary_distances(layout: &CodeLayout, d: &DetectorEvent) -> [(f64, bool); 2] {
    let last = layout.distance as f64 - 1.0;
    let along = match (layout.kind, d.kind) {
        (CodeKind::RotatedSurface, PauliType::Z) => d.y2,
        _ => d.x2,
    };
    let k = f64::from(along - 1) / 2.0;
    [(k + 1.0, true), (last - k, false)]
}

/// Complete graph on the given `kind` detectors with 1-norm weights. A
/// boundary edge costs the spatial distance to the nearer boundary; ties go
/// to the side that does not flip the logical.
pub fn build_uninformed(detectors: &[DetectorEvent], layout: &CodeLayout, kind: PauliType) -> Result<MatchingGraph> {
    let mut nodes: Vec<DetectorEvent> = detectors.iter().copied().filter(|d| d.kind == kind).collect();
    nodes.sort();
    nodes.dedup();
    let mut graph = MatchingGraph::new(nodes);
    let n = graph.nodes.len();
    for i in 0..n {
        for j in i + 1..n {
            let w = one_norm(&graph.nodes[i], &graph.nodes[j]);
            graph.add_edge(i, Some(j), w, false)?;
        }
        let [flip, keep] = boundary_distances(layout, &graph.nodes[i]);
        let (w, f) = if flip.0 < keep.0 { flip } else { keep };
        graph.add_edge(i, None, w, f)?;
    }
    Ok(graph)
}

/// Per-type matching decoder for surface and repetition codes.
#[derive(Clone, Debug)]
pub enum MwpmDecoder {
    /// Weights from a detector error model. `x` is absent for the repetition code.
    Informed { z: MatchingGraph, x: Option<MatchingGraph> },
    /// 1-norm weights, built per shot.
    Uninformed { layout: CodeLayout },
}

impl MwpmDecoder {
    pub fn informed(dem: &DetectorErrorModel, kind: CodeKind) -> Result<Self> {
        let z = build_informed(dem, PauliType::Z)?;
        let x = match kind {
            CodeKind::Repetition => None,
            CodeKind::RotatedSurface => Some(build_informed(dem, PauliType::X)?),
        };
        Ok(MwpmDecoder::Informed { z, x })
    }

    pub fn uninformed(layout: CodeLayout) -> Self {
        MwpmDecoder::Uninformed { layout }
    }

    /// Predicted `(λ_Z, λ_X)`: Z-type detectors predict the Z_L flip and
    /// X-type detectors the X_L flip, from two independent matchings.
    pub fn decode(&self, point: &DataPoint) -> Result<(bool, bool)> {
        let of = |t: PauliType| -> Vec<DetectorEvent> {
            point.detectors.iter().copied().filter(|d| d.kind == t).collect()
        };
        let (zs, xs) = (of(PauliType::Z), of(PauliType::X));
        match self {
            MwpmDecoder::Informed { z, x } => {
                let lz = z.decode(&zs)?.flip;
                let lx = match x {
                    Some(g) => g.decode(&xs)?.flip,
                    None if xs.is_empty() => false,
                    None => return Err(Error::Validation("X-type detectors on a repetition code".into())),
                };
                Ok((lz, lx))
            }
            MwpmDecoder::Uninformed { layout } => {
                let gz = build_uninformed(&zs, layout, PauliType::Z)?;
                let lz = gz.decode(&gz.nodes.clone())?.flip;
                let lx = if xs.is_empty() {
                    false
                } else {
                    let gx = build_uninformed(&xs, layout, PauliType::X)?;
                    gx.decode(&gx.nodes.clone())?.flip
                };
                Ok((lz, lx))
            }
        }
    }
}
