//! Learning the direction of causation from samples of a joint distribution.
//!
//! * [`synthgen`] draws labeled synthetic cause-effect scatterplots.
//! * [`nn`] is a small dense-network core with exact gradients.
//! * [`ncc`] is the set-input causation classifier, its training loop and grid search.
//! * [`tuebingen`] loads and scores the real-world cause-effect pairs benchmark.
//! * [`scores`] computes object, context, causal and anticausal scores of image features.

pub mod ncc;
pub mod nn;
pub mod scores;
pub mod seed;
pub mod stats;
pub mod synthgen;
pub mod tuebingen;

pub use ncc::{Architecture, NccError, NccModel, Objective, TrainConfig};
pub use synthgen::{CausalSample, GeneratorConfig, Label};
