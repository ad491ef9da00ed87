//! Minimal network core with exact analytic gradients: dense layers, batch
//! normalization, ReLU, inverted dropout, soft-target softmax cross-entropy
//! and RMSProp. Everything is `f64`.

mod activation;
mod batchnorm;
mod checkpoint;
mod dense;
mod loss;
mod rmsprop;

use ndarray::Array2;
use thiserror::Error;

pub use activation::{dropout, dropout_backward, keep_mask, relu, relu_backward, Dropout};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads};
pub use checkpoint::{Checkpoint, CheckpointError, Tensor};
pub use dense::{Dense, DenseGrads};
pub use loss::{log_softmax_rows, softmax_rows, softmax_xent};
pub use rmsprop::RmsProp;

/// Row-major matrix, rows are examples.
pub type Matrix = Array2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("target row {row} sums to {sum}, expected 1")]
    InvalidTarget { row: usize, sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
