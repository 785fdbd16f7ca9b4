//! Fixed-size representations and evaluation harness for irregular
//! multivariate time series with missing values.
//!
//! The central representation reduces each series to four statistics per
//! variable — mean and standard deviation of the observed values, and mean
//! and standard deviation of the changes between consecutive observations —
//! which removes the temporal axis entirely. Around it sit the comparison
//! representations (imputed/padded raw grids and the observation mask), two
//! deterministic classifier heads (L2-regularized logistic regression and
//! gradient-boosted trees with native missing-value routing), and a
//! stratified cross-validation driver with ranking and macro metrics.

pub mod baselines;
pub mod classify;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod matrix;
pub mod summary;

pub use dataset::{
    compute_global_stats, GlobalStats, LabeledDataset, Standardizer, TimeSeriesInstance,
};
pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
