//! Bagged random forest of shallow CART trees.

use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::{derive_seed, par_map, rng};
use crate::tree::{depth_rule, fit_tree, mtry_rule, TreeConfig, TreeModel};
use crate::{Error, Prediction, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub mtry: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl ForestConfig {
    /// Applies the shallow-tree depth and `mtry` rules for `p` features.
    pub fn for_features(p: usize, n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            max_depth: depth_rule(p),
            mtry: mtry_rule(p),
            min_samples_split: 2,
            seed,
        }
    }

    pub fn tree_seed(&self, j: usize) -> u64 {
        derive_seed(self.seed, j as u64)
    }

    /// Seed of tree `j`'s bootstrap draw.
    pub fn bootstrap_seed(&self, j: usize) -> u64 {
        derive_seed(self.tree_seed(j), 0)
    }

    /// Config of tree `j`; its seed drives feature subsampling.
    pub fn tree_config(&self, j: usize) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            mtry: self.mtry,
            min_samples_split: self.min_samples_split,
            seed: derive_seed(self.tree_seed(j), 1),
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
        }
        self.tree_config(0).validate(n_features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
    /// Dataset row indices drawn for each tree.
    pub bootstrap_indices: Vec<Vec<usize>>,
    pub config: ForestConfig,
}

/// `n` uniform draws with replacement from `0..n`.
pub fn bootstrap(n: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0..n)).collect()
}

/// Trains one tree per bootstrap of `rows`. Output depends only on the inputs,
/// never on how tree fits are scheduled.
pub fn fit_forest(data: &Dataset, rows: &[usize], config: &ForestConfig) -> Result<ForestModel> {
    config.validate(data.n_features())?;
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let fitted = par_map(config.n_trees, |j| {
        let sample: Vec<usize> = bootstrap(rows.len(), config.bootstrap_seed(j))
            .into_iter()
            .map(|b| rows[b])
            .collect();
        fit_tree(data, &sample, &config.tree_config(j)).map(|t| (t, sample))
    });
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut bootstrap_indices = Vec::with_capacity(config.n_trees);
    for result in fitted {
        let (tree, sample) = result?;
        trees.push(tree);
        bootstrap_indices.push(sample);
    }
    Ok(ForestModel {
        trees,
        tree_seeds: (0..config.n_trees).map(|j| config.tree_seed(j)).collect(),
        bootstrap_indices,
        config: *config,
    })
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn tree_prob1(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.prob1(row)).collect()
    }

    pub fn tree_votes(&self, row: &[f64]) -> Vec<u8> {
        self.trees
            .iter()
            .map(|t| u8::from(t.prob1(row) >= 0.5))
            .collect()
    }

    /// Hash of the fitted trees, used to check that variants share one forest.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.tree_seeds.hash(&mut h);
        for tree in &self.trees {
            for node in &tree.nodes {
                match *node {
                    crate::tree::Node::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                        ..
                    } => (feature, threshold.to_bits(), left, right).hash(&mut h),
                    crate::tree::Node::Leaf {
                        class1_fraction,
                        sample_count,
                    } => (class1_fraction.to_bits(), sample_count).hash(&mut h),
                }
            }
        }
        h.finish()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Majority vote (ties go to class 1) and mean class-1 probability.
pub fn predict_forest(model: &ForestModel, row: &[f64]) -> Prediction {
    let k = model.trees.len();
    let (votes, prob_sum) = model.trees.iter().fold((0usize, 0.0), |(v, s), t| {
        let p = t.prob1(row);
        (v + usize::from(p >= 0.5), s + p)
    });
    Prediction {
        class: u8::from(2 * votes >= k),
        score: prob_sum / k as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::predict_tree;

    fn toy() -> Dataset {
        let rows = (0..40)
            .map(|i| vec![i as f64, (i % 7) as f64, (i % 3) as f64])
            .collect();
        let labels = (0..40).map(|i| u8::from(i >= 20)).collect();
        Dataset::new(rows, labels, vec![], "toy").unwrap()
    }

    #[test]
    fn bootstrap_basics() {
        assert_eq!(bootstrap(1, 5), vec![0]);
        assert_eq!(bootstrap(5, 11), bootstrap(5, 11));
        assert_ne!(bootstrap(50, 11), bootstrap(50, 12));
    }

    #[test]
    fn bootstrap_coverage() {
        // expected distinct fraction is 1 - (1 - 1/n)^n ~ 0.632
        for seed in 0..5 {
            let b = bootstrap(1000, seed);
            let distinct = b.iter().collect::<std::collections::HashSet<_>>().len();
            let frac = distinct as f64 / 1000.0;
            assert!((0.60..=0.67).contains(&frac), "{frac}");
        }
    }

    #[test]
    fn single_tree_forest_matches_tree() {
        let d = toy();
        let rows: Vec<usize> = (0..40).collect();
        let cfg = ForestConfig::for_features(3, 1, 4);
        let f = fit_forest(&d, &rows, &cfg).unwrap();
        for i in 0..40 {
            let a = predict_forest(&f, d.row(i));
            let b = predict_tree(&f.trees[0], d.row(i));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn forest_invariants() {
        let d = toy();
        let rows: Vec<usize> = (0..30).collect();
        let cfg = ForestConfig::for_features(3, 25, 1);
        let f = fit_forest(&d, &rows, &cfg).unwrap();
        assert_eq!(f.n_trees(), 25);
        let distinct: std::collections::HashSet<_> = f.tree_seeds.iter().collect();
        assert_eq!(distinct.len(), 25);
        assert!(f
            .bootstrap_indices
            .iter()
            .all(|b| b.len() == 30 && b.iter().all(|&i| i < 30)));
        assert_eq!(fit_forest(&d, &rows, &cfg).unwrap(), f);
    }

    #[test]
    fn vote_rules() {
        let leaf = |p: f64| TreeModel {
            nodes: vec![crate::tree::Node::Leaf {
                class1_fraction: p,
                sample_count: 1,
            }],
            depth: 0,
            config: TreeConfig::for_features(1, 0),
        };
        let forest = |ps: &[f64]| ForestModel {
            trees: ps.iter().map(|&p| leaf(p)).collect(),
            tree_seeds: (0..ps.len() as u64).collect(),
            bootstrap_indices: vec![],
            config: ForestConfig::for_features(1, ps.len(), 0),
        };
        assert_eq!(predict_forest(&forest(&[1.0, 1.0, 0.0]), &[0.0]).class, 1);
        assert_eq!(predict_forest(&forest(&[1.0, 0.0]), &[0.0]).class, 1);
        assert_eq!(predict_forest(&forest(&[0.0, 0.0, 1.0]), &[0.0]).class, 0);
        let p = predict_forest(&forest(&[0.2, 0.4, 0.9]), &[0.0]);
        assert!((p.score - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_trees() {
        let d = toy();
        assert!(fit_forest(&d, &[0, 1], &ForestConfig::for_features(3, 0, 0)).is_err());
    }
}
