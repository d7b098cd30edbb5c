//! Random forests for binary classification with alternative ways of
//! combining the trees.
//!
//! A regular random forest gives every tree the same vote. This crate adds
//! four families of combiners, all trained on out-of-fold predictions of the
//! individual trees:
//!
//! * [`weighting::fit_optimal_accuracy`]: simplex weights maximizing the
//!   accuracy of the rounded weighted vote.
//! * [`weighting::fit_optimal_auc`]: simplex weights maximizing the AUC of the
//!   weighted class-1 probability.
//! * [`weighting::fit_performance_weights`]: weights proportional to each
//!   tree's out-of-fold accuracy.
//! * [`stacking`]: a second-level random forest, logistic regression or KNN
//!   trained on the trees' out-of-fold votes or probabilities.
//!
//! The [`bench`] module runs the full comparison over repeated 75/25 splits.
//!
//! ```no_run
//! use std::sync::Arc;
//! use wrf_core::{bench, data, forest, oof, optimizer, weighting};
//!
//! let dataset = bench::generate_synthetic(&bench::SyntheticSpec::default(), 7).unwrap();
//! let split = data::make_split(&dataset, 0.25, 5, 7).unwrap();
//! let config = forest::ForestConfig::for_features(dataset.n_features(), 100, 7);
//! let model = Arc::new(forest::fit_forest(&dataset, &split.train_indices, &config).unwrap());
//! let oof = oof::compute_oof(&dataset, &split, &config).unwrap();
//! let weighted = weighting::fit_optimal_accuracy(
//!     model,
//!     &oof,
//!     &optimizer::OptimizerConfig::default(),
//! )
//! .unwrap();
//! let prediction = weighting::predict_weighted(&weighted, dataset.row(split.test_indices[0]));
//! println!("class {} score {:.3}", prediction.class, prediction.score);
//! ```

pub mod bench;
pub mod data;
mod error;
pub mod forest;
pub mod metrics;
pub mod oof;
pub mod optimizer;
mod seed;
pub mod stacking;
pub mod tree;
pub mod weighting;

pub use error::{Error, Result};
pub use seed::derive_seed;

/// Class label and score returned by every classifier in the crate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Prediction {
    pub class: u8,
    /// Class-1 probability or weighted vote share, always in `[0, 1]`.
    pub score: f64,
}
