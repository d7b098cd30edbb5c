//! Out-of-fold predictions of every tree on the training rows.
//!
//! Tree `j` keeps its seed across folds: for fold `f` it is refit with the same
//! bootstrap and feature-sampling streams on the training rows outside `f`, then
//! predicts the rows inside `f`.

use std::hash::{Hash, Hasher};
use std::io::Write;

use crate::data::{Dataset, SplitPlan};
use crate::forest::{bootstrap, ForestConfig};
use crate::seed::par_map;
use crate::tree::{fit_tree, TreeModel};
use crate::{Error, Result};

/// `n_train x k` matrices of out-of-fold tree outputs, rows aligned with the
/// split's `train_indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct OofMatrix {
    binary: Vec<u8>,
    prob1: Vec<f64>,
    labels: Vec<u8>,
    n_trees: usize,
    folds: Vec<usize>,
}

impl OofMatrix {
    /// Builds a matrix from per-row class-1 probabilities; votes are `prob1 >= 0.5`.
    pub fn from_probabilities(prob1: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if prob1.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: prob1.len(),
                right: labels.len(),
            });
        }
        let k = prob1.first().map(Vec::len).unwrap_or(0);
        if k == 0 || prob1.is_empty() {
            return Err(Error::EmptyInput);
        }
        if prob1.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("ragged probability rows".into()));
        }
        if prob1.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        let flat: Vec<f64> = prob1.into_iter().flatten().collect();
        let n = labels.len();
        Ok(Self {
            binary: flat.iter().map(|&p| u8::from(p >= 0.5)).collect(),
            prob1: flat,
            labels,
            n_trees: k,
            folds: vec![0; n],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Fold id of each row.
    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn binary_row(&self, i: usize) -> &[u8] {
        &self.binary[i * self.n_trees..(i + 1) * self.n_trees]
    }

    pub fn prob1_row(&self, i: usize) -> &[f64] {
        &self.prob1[i * self.n_trees..(i + 1) * self.n_trees]
    }

    pub fn binary(&self, i: usize, j: usize) -> u8 {
        self.binary[i * self.n_trees + j]
    }

    pub fn prob1(&self, i: usize, j: usize) -> f64 {
        self.prob1[i * self.n_trees + j]
    }

    pub fn binary_column(&self, j: usize) -> Vec<u8> {
        (0..self.n_rows()).map(|i| self.binary(i, j)).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n_trees.hash(&mut h);
        self.labels.hash(&mut h);
        for p in &self.prob1 {
            p.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// CSV with columns `tree_0..tree_{k-1}, label`. `probabilities` picks the layer.
    pub fn write_csv<W: Write>(&self, writer: W, probabilities: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.n_trees).map(|j| format!("tree_{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut record: Vec<String> = if probabilities {
                self.prob1_row(i).iter().map(|p| p.to_string()).collect()
            } else {
                self.binary_row(i).iter().map(|v| v.to_string()).collect()
            };
            record.push(self.labels[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of rows where tree `j`'s out-of-fold vote equals the label.
pub fn column_accuracy(oof: &OofMatrix, j: usize) -> f64 {
    let hits = (0..oof.n_rows())
        .filter(|&i| oof.binary(i, j) == oof.labels[i])
        .count();
    hits as f64 / oof.n_rows() as f64
}

fn validate_split(data: &Dataset, split: &SplitPlan, config: &ForestConfig) -> Result<()> {
    if split.n_folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    if split.train_folds.len() != split.train_indices.len() {
        return Err(Error::LengthMismatch {
            left: split.train_folds.len(),
            right: split.train_indices.len(),
        });
    }
    if let Some(&f) = split.train_folds.iter().find(|&&f| f >= split.n_folds) {
        return Err(Error::InvalidParameter(format!(
            "fold id {f} >= {}",
            split.n_folds
        )));
    }
    config.validate(data.n_features())
}

/// Dataset rows of the training set outside fold `f`; both classes required.
fn outside_rows(data: &Dataset, split: &SplitPlan, f: usize) -> Result<Vec<usize>> {
    let rows: Vec<usize> = split
        .train_indices
        .iter()
        .zip(&split.train_folds)
        .filter(|&(_, &g)| g != f)
        .map(|(&r, _)| r)
        .collect();
    let ones = rows.iter().filter(|&&r| data.label(r) == 1).count();
    if ones == 0 || ones == rows.len() {
        return Err(Error::SingleClassFold { fold: f });
    }
    Ok(rows)
}

fn fit_fold_tree(
    data: &Dataset,
    outside: &[usize],
    config: &ForestConfig,
    j: usize,
) -> Result<TreeModel> {
    let sample: Vec<usize> = bootstrap(outside.len(), config.bootstrap_seed(j))
        .into_iter()
        .map(|b| outside[b])
        .collect();
    fit_tree(data, &sample, &config.tree_config(j))
}

/// The `n_trees` models that produce the out-of-fold entries of fold `fold`.
pub fn fit_fold_trees(
    data: &Dataset,
    split: &SplitPlan,
    config: &ForestConfig,
    fold: usize,
) -> Result<Vec<TreeModel>> {
    validate_split(data, split, config)?;
    if fold >= split.n_folds {
        return Err(Error::InvalidParameter(format!(
            "fold {fold} >= {}",
            split.n_folds
        )));
    }
    let outside = outside_rows(data, split, fold)?;
    par_map(config.n_trees, |j| fit_fold_tree(data, &outside, config, j))
        .into_iter()
        .collect()
}

/// Runs the `folds x n_trees` refits and assembles the out-of-fold matrices.
pub fn compute_oof(data: &Dataset, split: &SplitPlan, config: &ForestConfig) -> Result<OofMatrix> {
    validate_split(data, split, config)?;
    let n_folds = split.n_folds;
    let k = config.n_trees;

    // positions (into train_indices) inside each fold
    let mut inside: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (pos, &f) in split.train_folds.iter().enumerate() {
        inside[f].push(pos);
    }
    let outside = (0..n_folds)
        .map(|f| outside_rows(data, split, f))
        .collect::<Result<Vec<_>>>()?;

    let columns = par_map(n_folds * k, |task| {
        let (f, j) = (task / k, task % k);
        let tree = fit_fold_tree(data, &outside[f], config, j)?;
        Ok::<_, Error>(
            inside[f]
                .iter()
                .map(|&pos| tree.prob1(data.row(split.train_indices[pos])))
                .collect::<Vec<f64>>(),
        )
    });

    let n = split.train_indices.len();
    let mut prob1 = vec![0.0; n * k];
    for (task, col) in columns.into_iter().enumerate() {
        let col: Vec<f64> = col?;
        let (f, j) = (task / k, task % k);
        for (&pos, p) in inside[f].iter().zip(col) {
            prob1[pos * k + j] = p;
        }
    }
    Ok(OofMatrix {
        binary: prob1.iter().map(|&p| u8::from(p >= 0.5)).collect(),
        prob1,
        labels: split.train_indices.iter().map(|&r| data.label(r)).collect(),
        n_trees: k,
        folds: split.train_folds.clone(),
    })
}
