//! Approximate arithmetic circuits: CGP encoding, exhaustive error analysis,
//! evolutionary search, library curation and quantized-inference resilience.
//!
//! Numeric reports are generic over [`num::Scalar`] (`f32`/`f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod circuit;
pub mod cost;
pub mod evolve;
pub mod fmt;
pub mod generators;
pub mod genome;
pub mod library;
pub mod metrics;
pub mod num;
pub mod resilience;
pub mod sim;

pub use circuit::{Circuit, CircuitGate};
pub use genome::{CgpParams, FunctionSet, Gate, Genome};
pub use sim::Simulator;

/// Version of the toolkit.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version tag written into library manifests.
pub const MANIFEST_VERSION: u32 = 1;
/// Version tag of the quantized-network file.
pub const NETWORK_FORMAT_VERSION: u32 = 1;

pub type ErrorReport = metrics::ErrorStats<f64>;
pub type ErrorReport32 = metrics::ErrorStats<f32>;
pub type GateCostTable = cost::CostTable<f64>;
pub type CostReport = cost::CostMetrics<f64>;
pub type CostReport32 = cost::CostMetrics<f32>;
