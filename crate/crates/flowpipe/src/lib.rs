//! Shape-aligned pseudo optical flow for video editing pipelines.
//!
//! Given a forward optical flow sequence, per-frame object masks, and an
//! edited first-frame mask, this crate propagates the edited mask through
//! the video while stamping the object's mean motion into the edited
//! region (a pseudo flow), optionally calibrates the result by constrained
//! second-order smoothness minimization, and evaluates everything with
//! warping-error metrics against a built-in synthetic rigid-motion oracle.
//!
//! Field math is generic over the scalar type ([`scalar::Scalar`], f32 or
//! f64); the serialized pipeline uses f32 storage throughout.

pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod imp;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scfc;
pub mod synth;

pub use error::{Error, Result};

/// Pipeline-standard field types (f32 storage).
pub type FlowField32 = field::FlowField<f32>;
pub type FlowSequence32 = field::FlowSequence<f32>;
pub type MeanFlow32 = field::MeanFlow<f32>;

/// Double-precision aliases, used where finite-difference checks need the
/// extra headroom.
pub type FlowField64 = field::FlowField<f64>;
pub type FlowSequence64 = field::FlowSequence<f64>;
