//! CART classification trees with Gini impurity and per-split feature sampling.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::{derive_seed, rng};
use crate::{Error, Prediction, Result};

/// Splits whose impurity decrease does not exceed this are not taken.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// Features drawn at each split.
    pub mtry: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl TreeConfig {
    /// Shallow-tree rules: depth `max(1, round(sqrt(p) / 2))`, `mtry = max(1, floor(sqrt(p)))`.
    pub fn for_features(p: usize, seed: u64) -> Self {
        Self {
            max_depth: depth_rule(p),
            mtry: mtry_rule(p),
            min_samples_split: 2,
            seed,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if self.mtry == 0 || self.mtry > n_features {
            return Err(Error::InvalidParameter(format!(
                "mtry must lie in [1, {n_features}], got {}",
                self.mtry
            )));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter(
                "min_samples_split must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

pub fn depth_rule(p: usize) -> usize {
    ((p as f64).sqrt() / 2.0 + 0.5).floor().max(1.0) as usize
}

pub fn mtry_rule(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        /// Gini impurity decrease of this split.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class1_fraction: f64,
        sample_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Root is `nodes[0]`.
    pub nodes: Vec<Node>,
    pub depth: usize,
    pub config: TreeConfig,
}

/// Gini impurity `1 - q^2 - (1 - q)^2` of a 0/1 multiset.
pub fn gini(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ones = labels.iter().filter(|&&y| y == 1).count();
    Ok(gini_counts(ones, labels.len()))
}

#[inline]
pub(crate) fn gini_counts(ones: usize, n: usize) -> f64 {
    let q = ones as f64 / n as f64;
    1.0 - q * q - (1.0 - q) * (1.0 - q)
}

/// Impurity decrease of splitting `n` samples (`ones` positive) into a left part
/// with `n_left`/`ones_left`.
#[inline]
pub fn split_gain(ones: usize, n: usize, ones_left: usize, n_left: usize) -> f64 {
    let n_right = n - n_left;
    let wl = n_left as f64 / n as f64;
    let wr = n_right as f64 / n as f64;
    gini_counts(ones, n)
        - wl * gini_counts(ones_left, n_left)
        - wr * gini_counts(ones - ones_left, n_right)
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    data: &'a Dataset,
    config: TreeConfig,
    nodes: Vec<Node>,
    depth: usize,
    // scratch for sorting node samples along one feature
    scratch: Vec<(f64, u8)>,
}

/// Fits a tree on the multiset `sample_indices` of rows of `data`.
pub fn fit_tree(
    data: &Dataset,
    sample_indices: &[usize],
    config: &TreeConfig,
) -> Result<TreeModel> {
    if sample_indices.is_empty() {
        return Err(Error::EmptySample);
    }
    config.validate(data.n_features())?;
    if let Some(&bad) = sample_indices.iter().find(|&&i| i >= data.n_rows()) {
        return Err(Error::InvalidParameter(format!(
            "sample index {bad} out of range"
        )));
    }
    let mut builder = Builder {
        data,
        config: *config,
        nodes: Vec::new(),
        depth: 0,
        scratch: Vec::with_capacity(sample_indices.len()),
    };
    let mut samples = sample_indices.to_vec();
    builder.grow(&mut samples, 0, derive_seed(config.seed, 0));
    Ok(TreeModel {
        nodes: builder.nodes,
        depth: builder.depth,
        config: *config,
    })
}

impl Builder<'_> {
    fn grow(&mut self, samples: &mut [usize], depth: usize, node_seed: u64) -> usize {
        let n = samples.len();
        let ones = samples.iter().filter(|&&i| self.data.label(i) == 1).count();
        let id = self.nodes.len();
        self.depth = self.depth.max(depth);

        let split = if depth >= self.config.max_depth
            || ones == 0
            || ones == n
            || n < self.config.min_samples_split
        {
            None
        } else {
            self.best_split(samples, ones, node_seed)
        };

        let Some(split) = split else {
            self.nodes.push(Node::Leaf {
                class1_fraction: ones as f64 / n as f64,
                sample_count: n,
            });
            return id;
        };

        // reserve the slot, children are appended after it
        self.nodes.push(Node::Leaf {
            class1_fraction: 0.0,
            sample_count: 0,
        });
        let data = self.data;
        let mid = partition(samples, |&i| {
            data.value(i, split.feature) <= split.threshold
        });
        let (left_rows, right_rows) = samples.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1, derive_seed(node_seed, 1));
        let right = self.grow(right_rows, depth + 1, derive_seed(node_seed, 2));
        self.nodes[id] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            gain: split.gain,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, samples: &[usize], ones: usize, node_seed: u64) -> Option<Split> {
        let p = self.data.n_features();
        let mut features = sample(&mut rng(node_seed), p, self.config.mtry).into_vec();
        features.sort_unstable();

        let n = samples.len();
        let mut best: Option<Split> = None;
        for feature in features {
            self.scratch.clear();
            self.scratch.extend(
                samples
                    .iter()
                    .map(|&i| (self.data.value(i, feature), self.data.label(i))),
            );
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut n_left = 0;
            let mut ones_left = 0;
            for w in 0..n - 1 {
                let (v, y) = self.scratch[w];
                n_left += 1;
                ones_left += y as usize;
                let next = self.scratch[w + 1].0;
                if next <= v {
                    continue;
                }
                let gain = split_gain(ones, n, ones_left, n_left);
                // strict comparison keeps the lowest feature, then lowest threshold
                if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Moves elements satisfying `pred` to the front, returns their count.
fn partition<T, F: Fn(&T) -> bool>(items: &mut [T], pred: F) -> usize {
    let mut next = 0;
    for i in 0..items.len() {
        if pred(&items[i]) {
            items.swap(i, next);
            next += 1;
        }
    }
    next
}

impl TreeModel {
    fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                leaf => return leaf,
            }
        }
    }

    /// Class-1 fraction of the leaf `row` falls into.
    #[inline]
    pub fn prob1(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            Node::Leaf {
                class1_fraction, ..
            } => *class1_fraction,
            Node::Internal { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Gain of the root split, or 0 when the root is a leaf.
    pub fn root_gain(&self) -> f64 {
        match self.nodes[0] {
            Node::Internal { gain, .. } => gain,
            Node::Leaf { .. } => 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Routes `row` to a leaf: `class = 1` iff the leaf fraction is at least 0.5.
pub fn predict_tree(model: &TreeModel, row: &[f64]) -> Prediction {
    let prob1 = model.prob1(row);
    Prediction {
        class: u8::from(prob1 >= 0.5),
        score: prob1,
    }
}
