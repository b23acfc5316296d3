//! Certification and training toolkit for cost-sensitive robustness of
//! Gaussian-smoothed classifiers.
//!
//! The pieces fit together as follows: a [`cost::CostMatrix`] declares which
//! misclassifications count, [`radius`] turns class-probability vectors into
//! certified radii, [`certify`] estimates those probabilities by Monte-Carlo
//! sampling with exact binomial confidence bounds from [`gauss`], [`train`]
//! optimizes soft relaxations of the same radii, and [`eval`] aggregates
//! per-example certificates into dataset-level metrics.

// validation uses `!(x > 0.0)` on purpose: it rejects NaN along with
// non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod classifier;
pub mod cli;
pub mod cost;
pub mod data;
pub mod error;
pub mod eval;
pub mod gauss;
pub mod radius;
pub mod rng;
pub mod train;

pub use certify::{certify_cost_sensitive, certify_standard, SmoothingConfig, Status};
pub use classifier::{load_model, save_model, BaseClassifier, IntervalClassifier, MlpModel};
pub use cost::CostMatrix;
pub use error::{Error, Result};
pub use radius::{cost_sensitive_radius, standard_radius, ProbVector};
