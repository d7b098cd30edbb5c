//! Second-level learners trained on the trees' out-of-fold outputs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitPlan};
use crate::forest::{fit_forest, predict_forest, ForestConfig, ForestModel};
use crate::oof::{compute_oof, OofMatrix};
use crate::seed::derive_seed;
use crate::{Error, Prediction, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaMode {
    /// Out-of-fold 0/1 votes.
    Binary,
    /// Out-of-fold class-1 probabilities.
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    RandomForest,
    Logistic,
    Knn,
}

/// Meta-features (one column per tree) with the training labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    pub data: Dataset,
    pub mode: MetaMode,
}

pub fn build_meta(oof: &OofMatrix, mode: MetaMode) -> Result<MetaDataset> {
    let k = oof.n_trees();
    let mut flat = Vec::with_capacity(oof.n_rows() * k);
    for i in 0..oof.n_rows() {
        match mode {
            MetaMode::Binary => flat.extend(oof.binary_row(i).iter().map(|&v| f64::from(v))),
            MetaMode::Probability => flat.extend_from_slice(oof.prob1_row(i)),
        }
    }
    let names = (0..k).map(|j| format!("tree_{j}")).collect();
    let data = Dataset::from_flat(flat, oof.n_rows(), k, oof.labels().to_vec(), names, "meta")?;
    Ok(MetaDataset { data, mode })
}

fn meta_features(forest: &ForestModel, mode: MetaMode, row: &[f64]) -> Vec<f64> {
    match mode {
        MetaMode::Binary => forest.tree_votes(row).into_iter().map(f64::from).collect(),
        MetaMode::Probability => forest.tree_prob1(row),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iterations: usize,
    /// Stop once the gradient's max-norm falls below this.
    pub gradient_tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iterations: 1000,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// False when the iteration cap was hit before the gradient tolerance.
    pub converged: bool,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(params: &[f64], x: &[f64]) -> f64 {
    let (intercept, beta) = params.split_last().expect("intercept");
    beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + intercept
}

/// Mean log-likelihood minus `l2/2 * |beta|^2`. `params` holds the
/// coefficients followed by the (unpenalized) intercept.
pub fn logistic_objective(params: &[f64], data: &Dataset, l2: f64) -> f64 {
    let n = data.n_rows();
    let ll: f64 = (0..n)
        .map(|i| {
            let z = linear(params, data.row(i));
            f64::from(data.label(i)) * z - softplus(z)
        })
        .sum();
    let beta = &params[..params.len() - 1];
    ll / n as f64 - 0.5 * l2 * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Analytic gradient of [`logistic_objective`].
pub fn logistic_gradient(params: &[f64], data: &Dataset, l2: f64) -> Vec<f64> {
    let n = data.n_rows();
    let k = data.n_features();
    let mut grad = vec![0.0; k + 1];
    for i in 0..n {
        let x = data.row(i);
        let r = f64::from(data.label(i)) - sigmoid(linear(params, x));
        for (g, v) in grad.iter_mut().zip(x) {
            *g += r * v;
        }
        grad[k] += r;
    }
    for (j, g) in grad.iter_mut().enumerate() {
        *g /= n as f64;
        if j < k {
            *g -= l2 * params[j];
        }
    }
    grad
}

/// Gradient ascent from zero with Armijo backtracking.
pub fn fit_logistic(meta: &MetaDataset, config: &LogisticConfig) -> Result<LogisticModel> {
    let data = &meta.data;
    let k = data.n_features();
    let mut params = vec![0.0; k + 1];
    let mut value = logistic_objective(&params, data, config.l2);
    let mut rate: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let grad = logistic_gradient(&params, data, config.l2);
        let gnorm_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm_inf < config.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        rate = (rate * 2.0).min(1e6);
        let mut stepped = false;
        while rate > 1e-12 {
            let trial: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p + rate * g)
                .collect();
            let v = logistic_objective(&trial, data, config.l2);
            if v >= value + 1e-4 * rate * gnorm2 {
                params = trial;
                value = v;
                stepped = true;
                break;
            }
            rate *= 0.5;
        }
        if !stepped {
            break;
        }
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter("logistic fit diverged".into()));
    }
    let intercept = params.pop().expect("intercept");
    Ok(LogisticModel {
        coefficients: params,
        intercept,
        converged,
        iterations,
    })
}

impl LogisticModel {
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let z = self
            .coefficients
            .iter()
            .zip(x)
            .map(|(b, v)| b * v)
            .sum::<f64>()
            + self.intercept;
        let score = sigmoid(z);
        Prediction {
            class: u8::from(score >= 0.5),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub data: Dataset,
    pub neighbors: usize,
}

pub fn fit_knn(meta: &MetaDataset, neighbors: usize) -> Result<KnnModel> {
    if neighbors == 0 {
        return Err(Error::InvalidParameter("neighbors must be >= 1".into()));
    }
    if neighbors > meta.data.n_rows() {
        return Err(Error::TooManyNeighbors {
            neighbors,
            rows: meta.data.n_rows(),
        });
    }
    Ok(KnnModel {
        data: meta.data.clone(),
        neighbors,
    })
}

impl KnnModel {
    /// Majority label of the nearest rows (Euclidean; distance ties go to the
    /// lower row index, vote ties to class 1). Score is the class-1 share.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut dist: Vec<(f64, usize)> = (0..self.data.n_rows())
            .map(|i| {
                let d = self
                    .data
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.neighbors < dist.len() {
            dist.select_nth_unstable_by(self.neighbors - 1, cmp);
        }
        let ones = dist[..self.neighbors]
            .iter()
            .filter(|&&(_, i)| self.data.label(i) == 1)
            .count();
        Prediction {
            class: u8::from(2 * ones >= self.neighbors),
            score: ones as f64 / self.neighbors as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetaLearner {
    RandomForest(ForestModel),
    Logistic(LogisticModel),
    Knn(KnnModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackingConfig {
    pub knn_neighbors: usize,
    pub logistic: LogisticConfig,
    /// Trees in the second-level forest; `None` reuses the base forest's count.
    pub meta_trees: Option<usize>,
    pub seed: u64,
}

impl Default for StackingConfig {
    fn default() -> Self {
        Self {
            knn_neighbors: 5,
            logistic: LogisticConfig::default(),
            meta_trees: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StackedModel {
    pub base_forest: Arc<ForestModel>,
    pub meta_learner: MetaLearner,
    pub mode: MetaMode,
}

/// Fits the second-level learner on out-of-fold outputs of `base_forest`.
pub fn fit_meta_learner(
    base_forest: Arc<ForestModel>,
    oof: &OofMatrix,
    learner: LearnerKind,
    mode: MetaMode,
    config: &StackingConfig,
) -> Result<StackedModel> {
    if base_forest.n_trees() != oof.n_trees() {
        return Err(Error::LengthMismatch {
            left: base_forest.n_trees(),
            right: oof.n_trees(),
        });
    }
    let meta = build_meta(oof, mode)?;
    let meta_learner = match learner {
        LearnerKind::Logistic => MetaLearner::Logistic(fit_logistic(&meta, &config.logistic)?),
        LearnerKind::Knn => MetaLearner::Knn(fit_knn(&meta, config.knn_neighbors)?),
        LearnerKind::RandomForest => {
            let k = oof.n_trees();
            let n_trees = config.meta_trees.unwrap_or(base_forest.n_trees());
            let seed = derive_seed(config.seed, mode as u64);
            let forest_config = ForestConfig::for_features(k, n_trees, seed);
            let rows: Vec<usize> = (0..meta.data.n_rows()).collect();
            MetaLearner::RandomForest(fit_forest(&meta.data, &rows, &forest_config)?)
        }
    };
    Ok(StackedModel {
        base_forest,
        meta_learner,
        mode,
    })
}

/// Fits the base forest on the training rows, computes out-of-fold outputs and
/// trains the second-level learner on them.
pub fn fit_stacked(
    data: &Dataset,
    split: &SplitPlan,
    forest_config: &ForestConfig,
    learner: LearnerKind,
    mode: MetaMode,
    config: &StackingConfig,
) -> Result<StackedModel> {
    let base = Arc::new(fit_forest(data, &split.train_indices, forest_config)?);
    let oof = compute_oof(data, split, forest_config)?;
    fit_meta_learner(base, &oof, learner, mode, config)
}

pub fn predict_stacked(model: &StackedModel, row: &[f64]) -> Prediction {
    let x = meta_features(&model.base_forest, model.mode, row);
    match &model.meta_learner {
        MetaLearner::RandomForest(f) => predict_forest(f, &x),
        MetaLearner::Logistic(m) => m.predict(&x),
        MetaLearner::Knn(m) => m.predict(&x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_split;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta_from_rows(rows: Vec<Vec<f64>>, labels: Vec<u8>, mode: MetaMode) -> MetaDataset {
        MetaDataset {
            data: Dataset::new(rows, labels, vec![], "m").unwrap(),
            mode,
        }
    }

    #[test]
    fn binary_meta_is_zero_one() {
        let oof = OofMatrix::from_probabilities(vec![vec![0.2, 0.7], vec![0.5, 0.1]], vec![1, 0])
            .unwrap();
        let m = build_meta(&oof, MetaMode::Binary).unwrap();
        assert_eq!(m.data.row(0), [0.0, 1.0]);
        assert_eq!(m.data.row(1), [1.0, 0.0]);
        let m = build_meta(&oof, MetaMode::Probability).unwrap();
        assert_eq!(m.data.row(0), [0.2, 0.7]);
    }

    #[test]
    fn logistic_separable_single_feature() {
        let rows = (0..20).map(|i| vec![(i % 2) as f64]).collect();
        let labels = (0..20).map(|i| (i % 2) as u8).collect();
        let meta = meta_from_rows(rows, labels, MetaMode::Binary);
        let m = fit_logistic(&meta, &LogisticConfig::default()).unwrap();
        assert!(m.coefficients[0] > 0.0);
        assert!(m.predict(&[1.0]).score > 0.9);
        assert!(m.predict(&[0.0]).score < 0.1);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = r.random_range(1..6);
            let n = r.random_range(4..30);
            let rows = (0..n)
                .map(|_| (0..k).map(|_| r.random::<f64>()).collect())
                .collect();
            let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let d = Dataset::new(rows, labels, vec![], "g").unwrap();
            let params: Vec<f64> = (0..=k).map(|_| r.random_range(-2.0..2.0)).collect();
            let g = logistic_gradient(&params, &d, 1e-4);
            for j in 0..=k {
                let h = 1e-5;
                let mut up = params.clone();
                let mut down = params.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (logistic_objective(&up, &d, 1e-4) - logistic_objective(&down, &d, 1e-4))
                    / (2.0 * h);
                assert!(
                    (g[j] - fd).abs() <= 1e-5 * g[j].abs().max(1e-3),
                    "{} vs {}",
                    g[j],
                    fd
                );
            }
        }
    }

    #[test]
    fn constant_column_shrinks_and_intercept_carries_rate() {
        let rows = (0..40).map(|i| vec![1.0, ((i / 4) % 2) as f64]).collect();
        // rate 0.25, independent of the second column
        let labels = (0..40).map(|i| u8::from(i % 4 == 0)).collect::<Vec<_>>();
        let rate = labels.iter().filter(|&&y| y == 1).count() as f64 / 40.0;
        let meta = meta_from_rows(rows, labels, MetaMode::Probability);
        let m = fit_logistic(&meta, &LogisticConfig::default()).unwrap();
        assert!(m.coefficients[0].abs() < m.intercept.abs());
        let p = m.predict(&[1.0, 0.5]).score;
        assert!((p - rate).abs() < 0.05, "{p} vs {rate}");
    }

    #[test]
    fn knn_rules() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![5.0, 5.0],
        ];
        let labels = vec![0, 1, 1, 0, 1];
        let meta = meta_from_rows(rows.clone(), labels.clone(), MetaMode::Binary);
        let one = fit_knn(&meta, 1).unwrap();
        for (row, &y) in rows.iter().zip(&labels) {
            assert_eq!(one.predict(row).class, y);
        }
        let all = fit_knn(&meta, 5).unwrap();
        assert_eq!(all.predict(&[100.0, -3.0]).class, 1);
        // four nearest of the origin split 2-2
        let four = fit_knn(&meta, 4).unwrap();
        let p = four.predict(&[0.0, 0.0]);
        assert_eq!((p.class, p.score), (1, 0.5));
        assert!(matches!(
            fit_knn(&meta, 6),
            Err(Error::TooManyNeighbors { .. })
        ));
    }

    #[test]
    fn knn_distance_ties_prefer_lower_index() {
        let meta = meta_from_rows(
            vec![vec![1.0], vec![-1.0], vec![9.0]],
            vec![0, 1, 1],
            MetaMode::Binary,
        );
        assert_eq!(fit_knn(&meta, 1).unwrap().predict(&[0.0]).class, 0);
    }

    fn synthetic(n: usize, seed: u64) -> Dataset {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| r.random::<f64>()).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|x| u8::from(x[0] + 0.5 * x[1] > 0.75))
            .collect();
        Dataset::new(rows, labels, vec![], "s").unwrap()
    }

    #[test]
    fn stacked_pipeline_is_deterministic() {
        let d = synthetic(120, 1);
        let split = make_split(&d, 0.25, 5, 2).unwrap();
        let cfg = ForestConfig::for_features(4, 10, 2);
        for learner in [
            LearnerKind::RandomForest,
            LearnerKind::Logistic,
            LearnerKind::Knn,
        ] {
            for mode in [MetaMode::Binary, MetaMode::Probability] {
                let a = fit_stacked(&d, &split, &cfg, learner, mode, &StackingConfig::default())
                    .unwrap();
                let b = fit_stacked(&d, &split, &cfg, learner, mode, &StackingConfig::default())
                    .unwrap();
                assert_eq!(a.meta_learner, b.meta_learner);
                for &i in &split.test_indices {
                    let p = predict_stacked(&a, d.row(i));
                    assert!((0.0..=1.0).contains(&p.score));
                    assert_eq!(p, predict_stacked(&b, d.row(i)));
                }
            }
        }
    }

    #[test]
    fn single_tree_logistic_follows_tree() {
        let d = synthetic(80, 5);
        let split = make_split(&d, 0.25, 5, 4).unwrap();
        let mut cfg = ForestConfig::for_features(4, 1, 4);
        cfg.max_depth = 3;
        let m = fit_stacked(
            &d,
            &split,
            &cfg,
            LearnerKind::Logistic,
            MetaMode::Binary,
            &StackingConfig::default(),
        )
        .unwrap();
        let MetaLearner::Logistic(lm) = &m.meta_learner else {
            panic!()
        };
        assert!(lm.coefficients[0] > 0.0);
        for &i in &split.test_indices {
            let tree_vote = m.base_forest.tree_votes(d.row(i))[0];
            assert_eq!(predict_stacked(&m, d.row(i)).class, tree_vote);
        }
    }

    #[test]
    fn all_votes_one_with_positive_coefficients() {
        let model = LogisticModel {
            coefficients: vec![0.4, 0.1, 0.7],
            intercept: -0.5,
            converged: true,
            iterations: 0,
        };
        assert_eq!(model.predict(&[1.0, 1.0, 1.0]).class, 1);
    }

    #[test]
    fn binary_and_probability_agree_on_hard_outputs() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let labels: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let probs: Vec<Vec<f64>> = labels
            .iter()
            .map(|&y| {
                (0..4)
                    .map(|_| {
                        if r.random::<f64>() < 0.8 {
                            y as f64
                        } else {
                            1.0 - y as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let oof = OofMatrix::from_probabilities(probs, labels).unwrap();
        let a = build_meta(&oof, MetaMode::Binary).unwrap();
        let b = build_meta(&oof, MetaMode::Probability).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(
            fit_logistic(&a, &LogisticConfig::default()).unwrap(),
            fit_logistic(&b, &LogisticConfig::default()).unwrap()
        );
    }
}
