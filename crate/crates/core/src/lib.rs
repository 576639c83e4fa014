//! Structured label inference over layered label graphs.
//!
//! The crate provides the logistic baseline, bidirectional (BINN) and
//! structured (SINN) message-passing networks, their per-frame LSTM
//! extensions, partial-observation injection, the multi-label metric suite,
//! feature containers with a synthetic data generator, and optimizers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod model;
pub mod observation;
pub mod params;
pub mod tape;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{LabelGraph, Sign};
pub use math::{Matrix, Vector};
pub use model::{Checkpoint, Example, Injection, InjectionPoint, Model, Variant};
pub use params::{Grads, ParamSet};
pub use tape::Tape;
