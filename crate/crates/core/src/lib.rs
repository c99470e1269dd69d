//! Explainable visualization recommendation backed by a knowledge-graph embedding.
//!
//! The pipeline: [`corpus`] ingestion, per-column [`features`], supervised
//! [`discretize`]ation of continuous features, [`kg`] construction,
//! [`embed`]ding training, and rule-based [`infer`]ence. [`eval`] runs
//! cross-validation over the same pipeline.

pub(crate) mod container;
pub mod corpus;
pub mod discretize;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod infer;
pub mod kg;
pub mod model;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
