//! Credit attribution with attention: learns from document-level multilabels
//! and assigns a class to every sentence. Sentences are embedded with
//! separate key and value tables; an attention network over keys produces
//! per-sentence class weights, which pool the value embeddings into
//! class-specific document representations scored by per-class binary heads.
//! Sentence labels come from blending attention weights with document scores.
//!
//! The numeric core is generic over the scalar type ([`numeric::Scalar`],
//! implemented for `f32` and `f64`); the aliases below fix concrete widths.

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod synth;
pub mod training;

pub use error::{CawaError, Result};

/// Default scalar width for training and evaluation.
pub type Scalar64 = f64;
/// Reduced-precision alternative for memory-bound runs.
pub type Scalar32 = f32;

pub type Tensor64 = numeric::Tensor<f64>;
pub type Tensor32 = numeric::Tensor<f32>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type AdamState64 = numeric::AdamState<f64>;
pub type FitResult64 = training::FitResult<f64>;
pub type Checkpoint64 = checkpoint::Checkpoint<f64>;
