use ndarray::Array2;

use crate::error::{Error, Result};
use crate::gnn::layers::{ConvCache, DenseCache};
use crate::gnn::{Dense, GraphBatch, GraphConv, Scalar};
use crate::graph::{DetectorGraph, FeatureMode};
use crate::rng;

/// How the second term of a graph convolution combines node features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// `Σ_j e_ij W2 X_j`, the usual message-passing sum.
    Neighbor,
    /// `Σ_j e_ij W2 X_i`: each node's own features scaled by its total edge weight.
    SelfFeature,
}

impl Aggregation {
    pub fn to_u8(self) -> u8 {
        match self {
            Aggregation::Neighbor => 0,
            Aggregation::SelfFeature => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Aggregation::Neighbor),
            1 => Some(Aggregation::SelfFeature),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub mode: FeatureMode,
    /// Output width of each graph convolution.
    pub conv_widths: Vec<usize>,
    /// Output width of each dense layer in a head; the last must be 1.
    pub head_widths: Vec<usize>,
    pub heads: usize,
    pub aggregation: Aggregation,
}

impl ModelConfig {
    /// Full-size network: seven convolutions up to width 512, then
    /// `256 → 128 → 128 → 32 → 1` per head.
    pub fn full(mode: FeatureMode) -> Self {
        Self {
            mode,
            conv_widths: vec![32, 128, 256, 512, 512, 256, 256],
            head_widths: vec![128, 128, 32, 1],
            heads: Self::default_heads(mode),
            aggregation: Aggregation::Neighbor,
        }
    }

    /// Narrow network with the same depth, for tests and quick runs.
    pub fn small(mode: FeatureMode) -> Self {
        Self {
            mode,
            conv_widths: vec![16, 32, 32, 64, 64, 32, 32],
            head_widths: vec![32, 32, 16, 1],
            heads: Self::default_heads(mode),
            aggregation: Aggregation::Neighbor,
        }
    }

    /// Two heads (Z and X) for the surface code, one for the repetition code.
    pub fn default_heads(mode: FeatureMode) -> usize {
        match mode {
            FeatureMode::Repetition => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_widths.is_empty() || self.head_widths.is_empty() {
            return Err(Error::Validation("model needs at least one conv and one dense layer".into()));
        }
        if self.head_widths.last() != Some(&1) {
            return Err(Error::Validation("last dense layer must have width 1".into()));
        }
        if self.conv_widths.iter().chain(&self.head_widths).any(|&w| w == 0) {
            return Err(Error::Validation("layer widths must be positive".into()));
        }
        if !(1..=2).contains(&self.heads) {
            return Err(Error::Validation(format!("unsupported head count {}", self.heads)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub convs: Vec<GraphConv<F>>,
    /// `heads[h]` is the dense stack of head `h` (0 = Z, 1 = X).
    pub heads: Vec<Vec<Dense<F>>>,
}

/// Result of [`Model::loss_and_grads`].
#[derive(Clone, Debug)]
pub struct StepOutput<F> {
    /// Mean binary cross-entropy over available (graph, head) pairs.
    pub loss: f64,
    /// Number of (graph, head) pairs that carried a label.
    pub count: usize,
    /// Per-graph, per-head probabilities.
    pub predictions: Array2<F>,
    pub grads: Model<F>,
}

fn check_finite<F: Scalar>(x: &Array2<F>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(z) + (1-y) ln(1-σ(z))]` without forming `σ(z)`.
fn bce_with_logit(z: f64, y: bool) -> f64 {
    let y = if y { 1.0 } else { 0.0 };
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

struct Trace<F> {
    convs: Vec<ConvCache<F>>,
    heads: Vec<Vec<DenseCache<F>>>,
    logits: Array2<F>,
}

impl<F: Scalar> Model<F> {
    /// He-normal weights, zero biases; identical for identical seeds.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(rng::derive(seed, 0x676e_6e), 0);
        let mut d_in = config.mode.width();
        let mut convs = Vec::with_capacity(config.conv_widths.len());
        for &w in &config.conv_widths {
            convs.push(GraphConv::new(d_in, w, &mut r));
            d_in = w;
        }
        let pooled = d_in;
        let heads = (0..config.heads)
            .map(|_| {
                let mut d = pooled;
                config
                    .head_widths
                    .iter()
                    .map(|&w| {
                        let layer = Dense::new(d, w, &mut r);
                        d = w;
                        layer
                    })
                    .collect()
            })
            .collect();
        Ok(Self { config, convs, heads })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            convs: self.convs.iter().map(GraphConv::zeros_like).collect(),
            heads: self.heads.iter().map(|h| h.iter().map(Dense::zeros_like).collect()).collect(),
        }
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    /// Every parameter tensor in a fixed order, with its shape.
    pub fn tensors(&self) -> Vec<(Vec<usize>, &[F])> {
        let mut out: Vec<(Vec<usize>, &[F])> = Vec::new();
        for c in &self.convs {
            out.push((c.w1.shape().to_vec(), c.w1.as_slice().unwrap()));
            out.push((c.w2.shape().to_vec(), c.w2.as_slice().unwrap()));
            out.push((c.bias.shape().to_vec(), c.bias.as_slice().unwrap()));
        }
        for h in &self.heads {
            for d in h {
                out.push((d.w.shape().to_vec(), d.w.as_slice().unwrap()));
                out.push((d.bias.shape().to_vec(), d.bias.as_slice().unwrap()));
            }
        }
        out
    }

    /// Same order as [`Model::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        for c in &mut self.convs {
            out.push(c.w1.as_slice_mut().unwrap());
            out.push(c.w2.as_slice_mut().unwrap());
            out.push(c.bias.as_slice_mut().unwrap());
        }
        for h in &mut self.heads {
            for d in h {
                out.push(d.w.as_slice_mut().unwrap());
                out.push(d.bias.as_slice_mut().unwrap());
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Converts every parameter to another precision.
    pub fn cast<G: Scalar>(&self) -> Model<G> {
        let c2 = |a: &Array2<F>| a.mapv(|v| G::of(v.as_f64()));
        Model {
            config: self.config.clone(),
            convs: self
                .convs
                .iter()
                .map(|c| GraphConv {
                    w1: c2(&c.w1),
                    w2: c2(&c.w2),
                    bias: c.bias.mapv(|v| G::of(v.as_f64())),
                })
                .collect(),
            heads: self
                .heads
                .iter()
                .map(|h| {
                    h.iter()
                        .map(|d| Dense { w: c2(&d.w), bias: d.bias.mapv(|v| G::of(v.as_f64())) })
                        .collect()
                })
                .collect(),
        }
    }

    fn check_batch(&self, batch: &GraphBatch<F>) -> Result<()> {
        if batch.mode != self.config.mode || batch.features.ncols() != self.convs[0].d_in() {
            return Err(Error::Shape(format!(
                "batch has {:?} features of width {}, model expects {:?} of width {}",
                batch.mode,
                batch.features.ncols(),
                self.config.mode,
                self.convs[0].d_in()
            )));
        }
        Ok(())
    }

    fn pool(batch: &GraphBatch<F>, x: &Array2<F>) -> Array2<F> {
        let mut pooled = Array2::zeros((batch.num_graphs(), x.ncols()));
        for g in 0..batch.num_graphs() {
            let (lo, hi) = (batch.graph_offsets[g], batch.graph_offsets[g + 1]);
            let mut row = pooled.row_mut(g);
            for i in lo..hi {
                row += &x.row(i);
            }
            let n = F::of((hi - lo) as f64);
            row.mapv_inplace(|v| v / n);
        }
        pooled
    }

    fn run(&self, batch: &GraphBatch<F>, keep: bool) -> Result<Trace<F>> {
        self.check_batch(batch)?;
        let agg = self.config.aggregation;
        let mut conv_caches = Vec::new();
        let mut x = batch.features.clone();
        check_finite(&x, "input features")?;
        for conv in &self.convs {
            let (out, cache) = conv.forward(batch, x, agg);
            check_finite(&out, "graph convolution")?;
            if keep {
                conv_caches.push(cache);
            }
            x = out;
        }
        let pooled = Self::pool(batch, &x);
        let mut logits = Array2::zeros((batch.num_graphs(), self.num_heads()));
        let mut head_caches = Vec::new();
        for (h, head) in self.heads.iter().enumerate() {
            let mut y = pooled.clone();
            let mut caches = Vec::new();
            let last = head.len() - 1;
            for (k, dense) in head.iter().enumerate() {
                let (out, cache) = dense.forward(y, k != last);
                if keep {
                    caches.push(cache);
                }
                y = out;
            }
            check_finite(&y, "dense head")?;
            logits.column_mut(h).assign(&y.column(0));
            head_caches.push(caches);
        }
        Ok(Trace { convs: conv_caches, heads: head_caches, logits })
    }

    fn probability(z: F) -> F {
        let lo = F::min_positive_value();
        let hi = F::one() - F::epsilon() / F::of(2.0);
        F::of(sigmoid(z.as_f64())).max(lo).min(hi)
    }

    /// Per-graph, per-head probabilities of a logical flip.
    pub fn forward(&self, batch: &GraphBatch<F>) -> Result<Array2<F>> {
        Ok(self.run(batch, false)?.logits.mapv(Self::probability))
    }

    /// Probabilities for a single graph; an empty graph yields all zeros.
    pub fn predict(&self, graph: &DetectorGraph) -> Result<Vec<f64>> {
        if graph.is_empty() {
            return Ok(vec![0.0; self.num_heads()]);
        }
        let batch = GraphBatch::new(&[graph])?;
        Ok(self.forward(&batch)?.row(0).iter().map(|v| v.as_f64()).collect())
    }

    /// Probabilities for many graphs, evaluated in batches of `batch_size`.
    pub fn predict_many(&self, graphs: &[DetectorGraph], batch_size: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; self.num_heads()]; graphs.len()];
        let idx: Vec<usize> = (0..graphs.len()).filter(|&i| !graphs[i].is_empty()).collect();
        for chunk in idx.chunks(batch_size.max(1)) {
            let refs: Vec<&DetectorGraph> = chunk.iter().map(|&i| &graphs[i]).collect();
            let probs = self.forward(&GraphBatch::new(&refs)?)?;
            for (row, &i) in chunk.iter().enumerate() {
                out[i] = probs.row(row).iter().map(|v| v.as_f64()).collect();
            }
        }
        Ok(out)
    }

    /// Adds the gradient of `(Σ BCE) / denom` over this batch into `grads`.
    /// Returns the unscaled loss sum, the number of labelled pairs and the
    /// predictions. Heads without a label for a graph contribute nothing.
    pub fn accumulate_grads(
        &self,
        batch: &GraphBatch<F>,
        denom: usize,
        grads: &mut Model<F>,
    ) -> Result<(f64, usize, Array2<F>)> {
        let trace = self.run(batch, true)?;
        let n_graphs = batch.num_graphs();
        let scale = 1.0 / denom.max(1) as f64;
        let mut loss = 0.0;
        let mut count = 0;
        let mut g_pooled: Option<Array2<F>> = None;

        for (h, head) in self.heads.iter().enumerate() {
            let mut g = Array2::<F>::zeros((n_graphs, 1));
            let mut any = false;
            for (gi, labels) in batch.labels.iter().enumerate() {
                if let Some(y) = labels.head(h) {
                    let z = trace.logits[[gi, h]].as_f64();
                    loss += bce_with_logit(z, y);
                    count += 1;
                    any = true;
                    g[[gi, 0]] = F::of((sigmoid(z) - if y { 1.0 } else { 0.0 }) * scale);
                }
            }
            if !any {
                continue;
            }
            let last = head.len() - 1;
            for k in (0..head.len()).rev() {
                g = head[k].backward(&trace.heads[h][k], g, &mut grads.heads[h][k], k != last);
            }
            match &mut g_pooled {
                Some(acc) => *acc += &g,
                None => g_pooled = Some(g),
            }
        }

        let predictions = trace.logits.mapv(Self::probability);
        let Some(g_pooled) = g_pooled else {
            return Ok((loss, count, predictions));
        };

        let width = g_pooled.ncols();
        let mut g = Array2::<F>::zeros((batch.num_nodes(), width));
        for gi in 0..n_graphs {
            let (lo, hi) = (batch.graph_offsets[gi], batch.graph_offsets[gi + 1]);
            let n = F::of((hi - lo) as f64);
            let row = g_pooled.row(gi).mapv(|v| v / n);
            for i in lo..hi {
                g.row_mut(i).assign(&row);
            }
        }
        let agg = self.config.aggregation;
        for k in (0..self.convs.len()).rev() {
            let next =
                self.convs[k].backward(batch, &trace.convs[k], g, &mut grads.convs[k], agg, k > 0);
            match next {
                Some(n) => g = n,
                None => break,
            }
        }
        Ok((loss, count, predictions))
    }

    /// Mean BCE over the available labels of `batch` and its exact gradient.
    pub fn loss_and_grads(&self, batch: &GraphBatch<F>) -> Result<StepOutput<F>> {
        let count: usize = batch
            .labels
            .iter()
            .map(|l| (0..self.num_heads()).filter(|&h| l.head(h).is_some()).count())
            .sum();
        if count == 0 {
            return Err(Error::NoLabels);
        }
        let mut grads = self.zeros_like();
        let (loss, count, predictions) = self.accumulate_grads(batch, count, &mut grads)?;
        Ok(StepOutput { loss: loss / count as f64, count, predictions, grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PauliType;
    use crate::graph::build_graph;
    use crate::sim::{DataPoint, DetectorEvent, Labels};

    fn point(labels: Labels) -> DataPoint {
        DataPoint {
            detectors: vec![
                DetectorEvent { kind: PauliType::Z, x2: 1, y2: 1, t: 0 },
                DetectorEvent { kind: PauliType::X, x2: 3, y2: 1, t: 0 },
                DetectorEvent { kind: PauliType::Z, x2: 3, y2: 5, t: 0 },
            ],
            labels,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = ModelConfig::small(FeatureMode::Perfect);
        let a = Model::<f32>::init(cfg.clone(), 7).unwrap();
        let b = Model::<f32>::init(cfg.clone(), 7).unwrap();
        let c = Model::<f32>::init(cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.convs.iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn empty_graph_predicts_zero() {
        let m = Model::<f32>::init(ModelConfig::small(FeatureMode::Perfect), 1).unwrap();
        let g = build_graph(&DataPoint::default(), FeatureMode::Perfect);
        assert_eq!(m.predict(&g).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn masked_head_gets_no_gradient() {
        let m = Model::<f64>::init(ModelConfig::small(FeatureMode::Perfect), 3).unwrap();
        let g = build_graph(&point(Labels::z(true)), FeatureMode::Perfect);
        let batch = GraphBatch::new(&[&g]).unwrap();
        let out = m.loss_and_grads(&batch).unwrap();
        assert_eq!(out.count, 1);
        for d in &out.grads.heads[1] {
            assert!(d.w.iter().chain(d.bias.iter()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn no_labels_is_error() {
        let m = Model::<f32>::init(ModelConfig::small(FeatureMode::Perfect), 3).unwrap();
        let g = build_graph(&point(Labels::default()), FeatureMode::Perfect);
        let batch = GraphBatch::new(&[&g]).unwrap();
        assert!(matches!(m.loss_and_grads(&batch), Err(Error::NoLabels)));
    }

    #[test]
    fn width_mismatch_is_error() {
        let m = Model::<f32>::init(ModelConfig::small(FeatureMode::Circuit), 3).unwrap();
        let g = build_graph(&point(Labels::z(false)), FeatureMode::Perfect);
        let batch = GraphBatch::new(&[&g]).unwrap();
        assert!(matches!(m.forward(&batch), Err(Error::Shape(_))));
    }

    #[test]
    fn bce_at_half() {
        assert!((bce_with_logit(0.0, true) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_with_logit(0.0, false) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
