//! Dual-view instruction retrieval toolkit.
//!
//! Everything needed to run the polarity-reversal pipeline at desk scale:
//!
//! - [`corpus`] — instruction-retrieval records and JSONL persistence
//! - [`synth`] — LLM-backed synthesis of polarity-reversed instructions
//! - [`validate`] — structural checks on synthesized instructions
//! - [`mixer`] — size-matched data configurations and batch assembly
//! - [`toytrain`] — hashed bag-of-tokens encoder with InfoNCE training
//! - [`metrics`] — TREC-format ranking metrics and the paired-instruction p-MRR
//! - [`fixtures`] — deterministic corpus generators for tests and demos
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! concrete aliases below pin the defaults used by the CLI and file formats.

pub mod corpus;
pub mod fixtures;
pub mod metrics;
pub mod mixer;
pub mod scalar;
pub mod synth;
pub mod toytrain;
pub mod validate;

pub use scalar::Scalar;

/// Default scalar for CLI entry points and on-disk formats.
pub type Real = f64;

/// Encoder parameters at the default precision.
pub type EncoderParamsF64 = toytrain::EncoderParams<f64>;
/// Single-precision encoder parameters.
pub type EncoderParamsF32 = toytrain::EncoderParams<f32>;
