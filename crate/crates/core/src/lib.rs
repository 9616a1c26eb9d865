//! Decoding workbench for repetition and rotated surface codes.
//!
//! The crate covers the whole pipeline: code layouts, noisy stabilizer
//! circuits sampled with a bit-packed Pauli-frame simulator, detector
//! graphs, a graph-convolutional decoder with hand-written backpropagation,
//! a training harness, exact minimum-weight perfect matching, a brute-force
//! maximum-likelihood oracle, dataset persistence and evaluation utilities.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gnn;
pub mod graph;
pub mod matching;
pub mod ml;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{CodeKind, CodeLayout, Coord, PauliType};
pub use graph::{DetectorGraph, FeatureMode};
pub use sim::{Basis, DataPoint, DetectorEvent, Labels};
