//! Graph-convolutional decoder.
//!
//! Seven graph convolutions `X'_i = ReLU(W1 X_i + Σ_j e_ij W2 X_j + b)`,
//! mean pooling over nodes, and one dense head per logical label ending in
//! a sigmoid. Gradients are computed by explicit reverse-mode passes
//! through each layer. Everything is generic over [`Scalar`] so the same
//! code runs in `f32` for training and `f64` for gradient checks.

mod adam;
mod batch;
mod checkpoint;
mod layers;
mod model;

use std::fmt::Debug;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssign};

pub use adam::AdamState;
pub use batch::GraphBatch;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use layers::{Dense, GraphConv};
pub use model::{Aggregation, Model, ModelConfig, StepOutput};

pub trait Scalar:
    Float + NumAssign + LinalgScalar + ScalarOperand + Send + Sync + Debug + Default + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}
