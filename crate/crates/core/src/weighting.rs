//! Tree weighting schemes: optimized for out-of-fold accuracy, optimized for
//! out-of-fold AUC, and proportional to out-of-fold accuracy.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::forest::ForestModel;
use crate::metrics::auc_with_buffer;
use crate::oof::{column_accuracy, OofMatrix};
use crate::optimizer::{maximize_on_simplex, OptimizerConfig, OptimizerReport, WeightVector};
use crate::{Error, Prediction, Result};

/// Weighted sums this close below one half still round up, so that sums
/// like `3 * (1/6)` behave as the exact tie they represent.
const HALF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OptimalAccuracy,
    OptimalAuc,
    Performance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingReport {
    Optimizer(OptimizerReport),
    /// Out-of-fold accuracy of every tree.
    Accuracies(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct WeightedForest {
    pub forest: Arc<ForestModel>,
    pub weights: WeightVector,
    pub scheme: Scheme,
    pub training_report: TrainingReport,
}

/// `floor(sum(w_j * vote_j) + 0.5)`, i.e. class 1 when the weighted vote share
/// reaches one half.
#[inline]
pub fn weighted_predict_binary(weights: &[f64], votes: &[u8]) -> u8 {
    let share: f64 = weights
        .iter()
        .zip(votes)
        .map(|(w, &v)| w * f64::from(v))
        .sum();
    threshold_half(share)
}

#[inline]
fn threshold_half(share: f64) -> u8 {
    u8::from(share + HALF_TOLERANCE >= 0.5)
}

/// Convex combination of per-tree class-1 probabilities.
#[inline]
pub fn weighted_score(weights: &[f64], prob1: &[f64]) -> f64 {
    let s: f64 = weights.iter().zip(prob1).map(|(w, p)| w * p).sum();
    s.clamp(0.0, 1.0)
}

/// Out-of-fold accuracy of the rounded weighted vote.
pub fn oof_accuracy(oof: &OofMatrix, weights: &[f64]) -> f64 {
    let labels = oof.labels();
    let hits = (0..oof.n_rows())
        .filter(|&i| weighted_predict_binary(weights, oof.binary_row(i)) == labels[i])
        .count();
    hits as f64 / oof.n_rows() as f64
}

/// Out-of-fold AUC of the weighted class-1 probability.
pub fn oof_auc(oof: &OofMatrix, weights: &[f64]) -> Result<f64> {
    let labels = oof.labels();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::AucUndefined);
    }
    let scores: Vec<f64> = (0..oof.n_rows())
        .map(|i| weighted_score(weights, oof.prob1_row(i)))
        .collect();
    Ok(auc_with_buffer(labels, &scores, n_pos, &mut Vec::new()))
}

fn check_shapes(forest: &ForestModel, oof: &OofMatrix) -> Result<()> {
    if forest.n_trees() != oof.n_trees() {
        return Err(Error::LengthMismatch {
            left: forest.n_trees(),
            right: oof.n_trees(),
        });
    }
    Ok(())
}

/// Weights maximizing out-of-fold accuracy of the rounded weighted vote.
pub fn fit_optimal_accuracy(
    forest: Arc<ForestModel>,
    oof: &OofMatrix,
    config: &OptimizerConfig,
) -> Result<WeightedForest> {
    check_shapes(&forest, oof)?;
    let report = maximize_on_simplex(|w| oof_accuracy(oof, w), oof.n_trees(), config)?;
    Ok(WeightedForest {
        forest,
        weights: report.weights.clone(),
        scheme: Scheme::OptimalAccuracy,
        training_report: TrainingReport::Optimizer(report),
    })
}

/// Weights maximizing out-of-fold AUC of the weighted probability.
pub fn fit_optimal_auc(
    forest: Arc<ForestModel>,
    oof: &OofMatrix,
    config: &OptimizerConfig,
) -> Result<WeightedForest> {
    check_shapes(&forest, oof)?;
    let labels = oof.labels();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::AucUndefined);
    }
    let n = oof.n_rows();
    let objective = |w: &[f64]| {
        let scores: Vec<f64> = (0..n)
            .map(|i| weighted_score(w, oof.prob1_row(i)))
            .collect();
        auc_with_buffer(labels, &scores, n_pos, &mut Vec::with_capacity(n))
    };
    let report = maximize_on_simplex(objective, oof.n_trees(), config)?;
    Ok(WeightedForest {
        forest,
        weights: report.weights.clone(),
        scheme: Scheme::OptimalAuc,
        training_report: TrainingReport::Optimizer(report),
    })
}

/// Weights proportional to each tree's out-of-fold accuracy.
pub fn performance_weights(oof: &OofMatrix) -> Result<(WeightVector, Vec<f64>)> {
    let accuracies: Vec<f64> = (0..oof.n_trees())
        .map(|j| column_accuracy(oof, j))
        .collect();
    let total: f64 = accuracies.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateAccuracies);
    }
    let weights = WeightVector::new(accuracies.iter().map(|a| a / total).collect())?;
    Ok((weights, accuracies))
}

pub fn fit_performance_weights(
    forest: Arc<ForestModel>,
    oof: &OofMatrix,
) -> Result<WeightedForest> {
    check_shapes(&forest, oof)?;
    let (weights, accuracies) = performance_weights(oof)?;
    Ok(WeightedForest {
        forest,
        weights,
        scheme: Scheme::Performance,
        training_report: TrainingReport::Accuracies(accuracies),
    })
}

/// Accuracy and performance schemes round the weighted vote of tree classes;
/// the AUC scheme thresholds the weighted probability at 0.5.
pub fn predict_weighted(model: &WeightedForest, row: &[f64]) -> Prediction {
    let w = model.weights.as_slice();
    match model.scheme {
        Scheme::OptimalAccuracy | Scheme::Performance => {
            let votes = model.forest.tree_votes(row);
            let share: f64 = w.iter().zip(&votes).map(|(w, &v)| w * f64::from(v)).sum();
            Prediction {
                class: threshold_half(share),
                score: share.clamp(0.0, 1.0),
            }
        }
        Scheme::OptimalAuc => {
            let score = weighted_score(w, &model.forest.tree_prob1(row));
            Prediction {
                class: threshold_half(score),
                score,
            }
        }
    }
}

impl WeightedForest {
    /// CSV with columns `tree, weight`.
    pub fn write_weights_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_weights_csv(writer, self.weights.as_slice())
    }
}

pub fn write_weights_csv<W: Write>(writer: W, weights: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tree", "weight"])?;
    for (j, weight) in weights.iter().enumerate() {
        w.write_record([j.to_string(), weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
