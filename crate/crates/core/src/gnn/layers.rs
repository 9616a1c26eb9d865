use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};

use crate::gnn::{Aggregation, GraphBatch, Scalar};
use crate::rng::Rng;

fn he_normal<F: Scalar>(rng: &mut Rng, rows: usize, cols: usize) -> Array2<F> {
    let normal = Normal::new(0.0, (2.0 / cols as f64).sqrt()).unwrap();
    Array2::from_shape_simple_fn((rows, cols), || F::of(normal.sample(rng)))
}

/// `c = a · bᵀ`
fn mul_bt<F: Scalar>(a: ArrayView2<'_, F>, b: ArrayView2<'_, F>, c: &mut Array2<F>, beta: F) {
    general_mat_mul(F::one(), &a, &b.t(), beta, c);
}

fn add_bias<F: Scalar>(x: &mut Array2<F>, bias: &Array1<F>) {
    for mut row in x.rows_mut() {
        row += bias;
    }
}

fn relu_mask<F: Scalar>(grad: &mut Array2<F>, pre: &Array2<F>) {
    grad.zip_mut_with(pre, |g, &p| {
        if p <= F::zero() {
            *g = F::zero();
        }
    });
}

/// Graph convolution with weights `W1`, `W2` (`d_out × d_in`) and a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphConv<F> {
    pub w1: Array2<F>,
    pub w2: Array2<F>,
    pub bias: Array1<F>,
}

pub(crate) struct ConvCache<F> {
    input: Array2<F>,
    agg: Array2<F>,
    pre: Array2<F>,
}

impl<F: Scalar> GraphConv<F> {
    pub fn new(d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        Self {
            w1: he_normal(rng, d_out, d_in),
            w2: he_normal(rng, d_out, d_in),
            bias: Array1::zeros(d_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w1.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w1.nrows()
    }

    fn aggregate(batch: &GraphBatch<F>, x: ArrayView2<'_, F>, mode: Aggregation) -> Array2<F> {
        match mode {
            Aggregation::Neighbor => batch.aggregate_neighbors(x),
            Aggregation::SelfFeature => batch.aggregate_self(x),
        }
    }

    pub(crate) fn forward(
        &self,
        batch: &GraphBatch<F>,
        input: Array2<F>,
        mode: Aggregation,
    ) -> (Array2<F>, ConvCache<F>) {
        let agg = Self::aggregate(batch, input.view(), mode);
        let mut pre = Array2::zeros((input.nrows(), self.d_out()));
        mul_bt(input.view(), self.w1.view(), &mut pre, F::zero());
        mul_bt(agg.view(), self.w2.view(), &mut pre, F::one());
        add_bias(&mut pre, &self.bias);
        let out = pre.mapv(|v| v.max(F::zero()));
        (out, ConvCache { input, agg, pre })
    }

    /// Accumulates parameter gradients into `grad`; returns the input
    /// gradient when `need_input` is set.
    pub(crate) fn backward(
        &self,
        batch: &GraphBatch<F>,
        cache: &ConvCache<F>,
        mut g_out: Array2<F>,
        grad: &mut GraphConv<F>,
        mode: Aggregation,
        need_input: bool,
    ) -> Option<Array2<F>> {
        relu_mask(&mut g_out, &cache.pre);
        let g_pre = g_out;
        general_mat_mul(F::one(), &g_pre.t(), &cache.input, F::one(), &mut grad.w1);
        general_mat_mul(F::one(), &g_pre.t(), &cache.agg, F::one(), &mut grad.w2);
        grad.bias += &g_pre.sum_axis(Axis(0));
        if !need_input {
            return None;
        }
        let mut g_in = g_pre.dot(&self.w1);
        let g_agg = g_pre.dot(&self.w2);
        // Both aggregations are symmetric linear maps.
        g_in += &Self::aggregate(batch, g_agg.view(), mode);
        Some(g_in)
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    pub w: Array2<F>,
    pub bias: Array1<F>,
}

pub(crate) struct DenseCache<F> {
    input: Array2<F>,
    pre: Array2<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        Self { w: he_normal(rng, d_out, d_in), bias: Array1::zeros(d_out) }
    }

    pub fn zeros_like(&self) -> Self {
        Self { w: Array2::zeros(self.w.raw_dim()), bias: Array1::zeros(self.bias.raw_dim()) }
    }

    pub fn d_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w.nrows()
    }

    /// Returns the activation (ReLU when `relu`, identity otherwise).
    pub(crate) fn forward(&self, input: Array2<F>, relu: bool) -> (Array2<F>, DenseCache<F>) {
        let mut pre = Array2::zeros((input.nrows(), self.d_out()));
        mul_bt(input.view(), self.w.view(), &mut pre, F::zero());
        add_bias(&mut pre, &self.bias);
        let out = if relu { pre.mapv(|v| v.max(F::zero())) } else { pre.clone() };
        (out, DenseCache { input, pre })
    }

    pub(crate) fn backward(
        &self,
        cache: &DenseCache<F>,
        mut g_out: Array2<F>,
        grad: &mut Dense<F>,
        relu: bool,
    ) -> Array2<F> {
        if relu {
            relu_mask(&mut g_out, &cache.pre);
        }
        general_mat_mul(F::one(), &g_out.t(), &cache.input, F::one(), &mut grad.w);
        grad.bias += &g_out.sum_axis(Axis(0));
        g_out.dot(&self.w)
    }
}
