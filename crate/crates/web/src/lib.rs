//! Browser bindings. Every export returns JSON so the page needs no glue types.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wrf_core::bench::{
    generate_synthetic, run_repetition, ExperimentConfig, ModelKind, SyntheticSpec,
};
use wrf_core::data::{make_split, Dataset};
use wrf_core::forest::{fit_forest, ForestConfig};
use wrf_core::metrics::{auc, roc_curve};
use wrf_core::oof::compute_oof;
use wrf_core::optimizer::{project_to_simplex, OptimizerConfig, WeightVector};
use wrf_core::weighting::{fit_optimal_auc, weighted_score};

#[derive(Serialize)]
struct ModelScore {
    id: &'static str,
    title: &'static str,
    accuracy: f64,
}

#[derive(Serialize)]
struct Curve {
    auc: f64,
    points: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct RocComparison {
    uniform: Curve,
    optimized: Curve,
    weights: Vec<f64>,
}

fn synthetic(
    n: usize,
    p: usize,
    balance: f64,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset, String> {
    let spec = SyntheticSpec {
        n,
        p,
        balance,
        separation,
        noise,
    };
    generate_synthetic(&spec, seed).map_err(|e| e.to_string())
}

/// Test accuracy of all ten models on one split of a synthetic dataset.
pub fn compare_models_json(
    n: usize,
    p: usize,
    balance: f64,
    separation: f64,
    noise: f64,
    trees: usize,
    seed: u64,
) -> Result<String, String> {
    let data = synthetic(n, p, balance, separation, noise, seed)?;
    let config = ExperimentConfig {
        n_trees: trees,
        repetitions: 1,
        seed,
        models: ModelKind::ALL.to_vec(),
        ..Default::default()
    };
    config.validate().map_err(|e| e.to_string())?;
    let result = run_repetition(&data, "demo", 0, &config).map_err(|e| e.to_string())?;
    let scores: Vec<ModelScore> = result
        .accuracies
        .into_iter()
        .map(|(m, accuracy)| ModelScore {
            id: m.id(),
            title: m.title(),
            accuracy,
        })
        .collect();
    serde_json::to_string(&scores).map_err(|e| e.to_string())
}

/// Test-set ROC curves of the uniform and the AUC-optimized weighted forest.
pub fn roc_comparison_json(
    n: usize,
    p: usize,
    separation: f64,
    noise: f64,
    trees: usize,
    seed: u64,
) -> Result<String, String> {
    let data = synthetic(n, p, 0.5, separation, noise, seed)?;
    let split = make_split(&data, 0.25, 5, seed).map_err(|e| e.to_string())?;
    let config = ForestConfig::for_features(p, trees, seed);
    let forest =
        Arc::new(fit_forest(&data, &split.train_indices, &config).map_err(|e| e.to_string())?);
    let oof = compute_oof(&data, &split, &config).map_err(|e| e.to_string())?;
    let fitted = fit_optimal_auc(
        Arc::clone(&forest),
        &oof,
        &OptimizerConfig::default().with_seed(seed),
    )
    .map_err(|e| e.to_string())?;

    let labels: Vec<u8> = split.test_indices.iter().map(|&i| data.label(i)).collect();
    let curve = |w: &[f64]| -> Result<Curve, String> {
        let scores: Vec<f64> = split
            .test_indices
            .iter()
            .map(|&i| weighted_score(w, &forest.tree_prob1(data.row(i))))
            .collect();
        Ok(Curve {
            auc: auc(&labels, &scores).map_err(|e| e.to_string())?,
            points: roc_curve(&labels, &scores).map_err(|e| e.to_string())?,
        })
    };
    let comparison = RocComparison {
        uniform: curve(WeightVector::uniform(trees).as_slice())?,
        optimized: curve(fitted.weights.as_slice())?,
        weights: fitted.weights.as_slice().to_vec(),
    };
    serde_json::to_string(&comparison).map_err(|e| e.to_string())
}

/// Euclidean projection onto the probability simplex.
pub fn project_json(values: &[f64]) -> Result<String, String> {
    let w = project_to_simplex(values).map_err(|e| e.to_string())?;
    serde_json::to_string(w.as_slice()).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = compareModels)]
pub fn compare_models(
    n: usize,
    p: usize,
    balance: f64,
    separation: f64,
    noise: f64,
    trees: usize,
    seed: u32,
) -> Result<String, JsError> {
    compare_models_json(n, p, balance, separation, noise, trees, u64::from(seed))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rocComparison)]
pub fn roc_comparison(
    n: usize,
    p: usize,
    separation: f64,
    noise: f64,
    trees: usize,
    seed: u32,
) -> Result<String, JsError> {
    roc_comparison_json(n, p, separation, noise, trees, u64::from(seed))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = projectToSimplex)]
pub fn project(values: Vec<f64>) -> Result<String, JsError> {
    project_json(&values).map_err(|e| JsError::new(&e))
}
