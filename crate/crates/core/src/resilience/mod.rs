//! Quantized inference with pluggable multipliers and accuracy sweeps.
//!
//! Weights are stored as sign and 7-bit magnitude so unsigned 8x8
//! multipliers apply unchanged: each product is `sign(w) * lut[|w|][a]`.
//! Only the products are approximate; accumulation and requantization are
//! exact.

pub mod dataset;
pub mod infer;
pub mod lut;
pub mod network;
pub mod sweep;
pub mod train;

use thiserror::Error;

use crate::sim::SimError;

pub use dataset::{synthetic_blobs, BlobSpec, Dataset};
pub use infer::{accuracy, infer, infer_assigned, infer_reference, Inference, LutAssignment};
pub use lut::MultiplierLut;
pub use network::{Affine, ConvShape, Layer, QuantizedNetwork};
pub use sweep::{full_replacement_eval, layerwise_sweep, resilience_report, spearman, SweepReport};
pub use train::{train_tiny_net, FloatMlp, TinyNet, TrainConfig};

#[derive(Debug, Error)]
pub enum ResilienceError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("multiplier must be n x n -> 2n bits with n <= 12, got {inputs} -> {outputs}")]
    LutArity { inputs: usize, outputs: usize },
    #[error("LUT width {0} does not match the 8-bit network")]
    LutWidth(usize),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}
