//! Mean estimation for high-dimensional entangled Gaussians.
//!
//! Samples share a common mean but have individual covariances; only an
//! `alpha` fraction is guaranteed to have covariance at most the identity.
//! The estimator combines a tournament warm start, rejection sampling around
//! the current guess and a recursive split into low- and high-variance
//! subspaces.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod recursive;
pub mod rng;
pub mod scalar;
pub mod subspace;
pub mod tournament;

pub use error::{EmestError, Result};
pub use model::{generate_dataset, AdversaryKind, AdversarySpec, Dataset, GroundTruth, ModelParams, SampleSet};
pub use recursive::{entangled_mean_estimation, AlgoConfig, EstimateReport};
pub use scalar::{OneDEstimator, Shorth};
