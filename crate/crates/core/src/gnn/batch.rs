use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::gnn::Scalar;
use crate::graph::{DetectorGraph, FeatureMode};
use crate::sim::Labels;

/// Non-empty graphs stacked into one node matrix.
///
/// Within each graph, nodes are placed in canonical order (detectors sorted
/// by type, position and round) and every neighbour list is sorted by that
/// position. All sums therefore run in an order that does not depend on how
/// the input graph numbered its nodes.
#[derive(Clone, Debug)]
pub struct GraphBatch<F> {
    pub mode: FeatureMode,
    pub features: Array2<F>,
    /// `graph_offsets[g]..graph_offsets[g + 1]` are the rows of graph `g`.
    pub graph_offsets: Vec<usize>,
    /// CSR adjacency: neighbours of row `i` are `targets[adj_offsets[i]..adj_offsets[i + 1]]`.
    adj_offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<F>,
    pub labels: Vec<Labels>,
}

impl<F: Scalar> GraphBatch<F> {
    pub fn new(graphs: &[&DetectorGraph]) -> Result<Self> {
        let mode = graphs
            .first()
            .map(|g| g.mode)
            .ok_or_else(|| Error::Validation("empty batch".into()))?;
        let width = mode.width();
        let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut features = Vec::with_capacity(total * width);
        let mut graph_offsets = vec![0];
        let mut adj_offsets = vec![0];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut labels = Vec::with_capacity(graphs.len());

        for g in graphs {
            if g.mode != mode {
                return Err(Error::Validation("mixed feature modes in one batch".into()));
            }
            if g.is_empty() {
                return Err(Error::Validation("empty graphs cannot be batched".into()));
            }
            let base = *graph_offsets.last().unwrap();
            let n = g.num_nodes();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| g.nodes[i]);
            let mut pos = vec![0usize; n];
            for (p, &i) in order.iter().enumerate() {
                pos[i] = p;
            }
            let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            for e in &g.edges {
                nbrs[pos[e.a]].push((pos[e.b], e.weight));
                nbrs[pos[e.b]].push((pos[e.a], e.weight));
            }
            for (p, &i) in order.iter().enumerate() {
                features.extend(mode.features(&g.nodes[i]).into_iter().map(F::of));
                let list = &mut nbrs[p];
                list.sort_by_key(|&(j, _)| j);
                for &(j, w) in list.iter() {
                    targets.push((base + j) as u32);
                    weights.push(F::of(w));
                }
                adj_offsets.push(targets.len());
            }
            graph_offsets.push(base + n);
            labels.push(g.labels);
        }
        let features = Array2::from_shape_vec((total, width), features)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(Self { mode, features, graph_offsets, adj_offsets, targets, weights, labels })
    }

    pub fn num_graphs(&self) -> usize {
        self.graph_offsets.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    /// Row `i` of the result is `Σ_j e_ij x_j` over the neighbours of `i`.
    pub(crate) fn aggregate_neighbors(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut out = Array2::<F>::zeros(x.raw_dim());
        for i in 0..x.nrows() {
            let mut row = out.row_mut(i);
            for k in self.adj_offsets[i]..self.adj_offsets[i + 1] {
                let j = self.targets[k] as usize;
                row.scaled_add(self.weights[k], &x.row(j));
            }
        }
        out
    }

    /// Row `i` of the result is `(Σ_j e_ij) x_i`.
    pub(crate) fn aggregate_self(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut out = x.to_owned();
        for i in 0..x.nrows() {
            let s = self.weights[self.adj_offsets[i]..self.adj_offsets[i + 1]]
                .iter()
                .fold(F::zero(), |a, &w| a + w);
            out.row_mut(i).mapv_inplace(|v| v * s);
        }
        out
    }
}
