//! Issue-adjusted ideal point models for legislative roll-call data.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] loads and validates votes, lawmakers and bill texts, and
//!   assigns votes to cross-validation folds.
//! * [`vocab`] turns bill tokens into a phrase vocabulary.
//! * [`topics`] builds labeled topics and infers per-bill issue mixtures.
//! * [`model`] holds the vote likelihood, priors and a synthetic generator.
//! * [`inference`] fits a mean-field Gaussian posterior with Monte-Carlo
//!   score-function gradients and second-order coordinate updates.
//! * [`eval`] covers held-out likelihood, issue improvement, corrected
//!   adjustments, permutation significance and party discriminant analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod topics;
pub mod vocab;

pub use error::{Error, ErrorKind, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
