//! Black-box maximization over the probability simplex.
//!
//! Multi-start projected ascent. Each start estimates directional forward
//! differences toward every vertex, steps along that estimate, projects back
//! onto the simplex and backtracks by halving until the objective strictly
//! improves. The uniform vector is always one of the starts and only strict
//! improvements are accepted, so the result never scores below uniform weights.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::seed::{par_map, rng};
use crate::{Error, Result};

/// Tolerance on `sum(w) == 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyInput);
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, j: usize) -> Self {
        let mut w = vec![0.0; k];
        w[j] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Euclidean projection onto `{w : sum(w) = 1, w >= 0}` by sorting and thresholding.
pub fn project_to_simplex(v: &[f64]) -> Result<WeightVector> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "cannot project a non-finite vector".into(),
        ));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    Ok(WeightVector(
        v.iter().map(|&x| (x - theta).max(0.0)).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Objective evaluations allowed per start; `None` means `200 * k`.
    pub budget_per_start: Option<usize>,
    /// Forward-difference step.
    pub gradient_step: f64,
    /// Backtracking stops once the step length falls below this.
    pub min_step: f64,
    /// Number of best single-tree vertices used as starts.
    pub vertex_starts: usize,
    /// Number of Dirichlet(1) random starts.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget_per_start: None,
            gradient_step: 1e-3,
            min_step: 1e-6,
            vertex_starts: 5,
            random_starts: 3,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `k = 1`, nothing to optimize.
    SinglePoint,
    BudgetExhausted,
    /// Backtracking found no improving step of length at least `min_step`.
    StepTolerance,
    /// Every finite-difference probe left the objective unchanged.
    FlatNeighbourhood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub weights: WeightVector,
    pub objective_value: f64,
    /// Objective at uniform weights.
    pub baseline_value: f64,
    pub evaluations: usize,
    pub converged_reason: StopReason,
    /// Index of the winning start: 0 is uniform, then vertices, then random.
    pub best_start: usize,
}

struct StartOutcome {
    w: Vec<f64>,
    value: f64,
    evaluations: usize,
    reason: StopReason,
}

fn checked<F: Fn(&[f64]) -> f64>(objective: &F, w: &[f64]) -> Result<f64> {
    let v = objective(w);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective)
    }
}

/// Maximizes `objective` over the `(k-1)`-simplex.
pub fn maximize_on_simplex<F>(
    objective: F,
    k: usize,
    config: &OptimizerConfig,
) -> Result<OptimizerReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if k == 0 {
        return Err(Error::EmptyInput);
    }
    if !(config.gradient_step > 0.0 && config.gradient_step < 1.0)
        || config.min_step.is_nan()
        || config.min_step <= 0.0
    {
        return Err(Error::InvalidParameter(
            "gradient_step must lie in (0, 1) and min_step be positive".into(),
        ));
    }
    let uniform = WeightVector::uniform(k);
    let baseline = checked(&objective, uniform.as_slice())?;
    if k == 1 {
        return Ok(OptimizerReport {
            weights: uniform,
            objective_value: baseline,
            baseline_value: baseline,
            evaluations: 1,
            converged_reason: StopReason::SinglePoint,
            best_start: 0,
        });
    }

    let mut starts: Vec<(Vec<f64>, f64)> = vec![(uniform.0.clone(), baseline)];
    let vertex_values = (0..k)
        .map(|j| checked(&objective, WeightVector::vertex(k, j).as_slice()))
        .collect::<Result<Vec<f64>>>()?;
    let mut ranked: Vec<usize> = (0..k).collect();
    ranked.sort_by(|&a, &b| {
        vertex_values[b]
            .total_cmp(&vertex_values[a])
            .then(a.cmp(&b))
    });
    for &j in ranked.iter().take(config.vertex_starts) {
        starts.push((WeightVector::vertex(k, j).0, vertex_values[j]));
    }
    let mut r = rng(config.seed);
    for _ in 0..config.random_starts {
        let draws: Vec<f64> = (0..k).map(|_| r.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        let w: Vec<f64> = draws.iter().map(|d| d / total).collect();
        let value = checked(&objective, &w)?;
        starts.push((w, value));
    }
    let setup_evaluations = 1 + k + config.random_starts;

    let budget = config.budget_per_start.unwrap_or(200 * k);
    let outcomes = par_map(starts.len(), |s| {
        let (w, value) = &starts[s];
        ascend(&objective, w.clone(), *value, budget, config)
    });

    let mut best: Option<(usize, StartOutcome)> = None;
    let mut evaluations = setup_evaluations;
    for (s, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        evaluations += outcome.evaluations;
        // strict: ties keep the lowest start index
        if best.as_ref().is_none_or(|(_, b)| outcome.value > b.value) {
            best = Some((s, outcome));
        }
    }
    let (best_start, best) = best.expect("at least the uniform start");
    Ok(OptimizerReport {
        weights: WeightVector(best.w),
        objective_value: best.value,
        baseline_value: baseline,
        evaluations,
        converged_reason: best.reason,
        best_start,
    })
}

fn ascend<F>(
    objective: &F,
    mut w: Vec<f64>,
    mut value: f64,
    budget: usize,
    config: &OptimizerConfig,
) -> Result<StartOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    let k = w.len();
    let h = config.gradient_step;
    let mut evaluations = 0;
    let mut probe = vec![0.0; k];
    let mut gradient = vec![0.0; k];
    let mut trial = vec![0.0; k];

    let reason = loop {
        if evaluations + k > budget {
            break StopReason::BudgetExhausted;
        }
        // Probing along e_j - w keeps every probe feasible. The estimate differs
        // from the coordinate gradient by a shift common to all j, which the
        // simplex projection ignores.
        for j in 0..k {
            for (p, &x) in probe.iter_mut().zip(&w) {
                *p = (1.0 - h) * x;
            }
            probe[j] += h;
            gradient[j] = (checked(objective, &probe)? - value) / h;
        }
        evaluations += k;

        let scale = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale == 0.0 {
            break StopReason::FlatNeighbourhood;
        }
        let mut step = 1.0 / scale;
        let mut accepted = None;
        while step >= config.min_step {
            if evaluations >= budget {
                break;
            }
            for ((t, &x), &g) in trial.iter_mut().zip(&w).zip(&gradient) {
                *t = x + step * g;
            }
            let candidate = project_to_simplex(&trial)?.0;
            let v = checked(objective, &candidate)?;
            evaluations += 1;
            if v > value {
                accepted = Some((candidate, v));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, v)) = accepted else {
            break if evaluations >= budget {
                StopReason::BudgetExhausted
            } else {
                StopReason::StepTolerance
            };
        };
        let moved = candidate
            .iter()
            .zip(&w)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = candidate;
        value = v;
        if moved < config.min_step {
            break StopReason::StepTolerance;
        }
    };
    Ok(StartOutcome {
        w,
        value,
        evaluations,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exact projection by enumerating every support set.
    fn projection_by_support(v: &[f64]) -> Vec<f64> {
        let k = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << k) {
            let support: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
            let shift = (support.iter().map(|&j| v[j]).sum::<f64>() - 1.0) / support.len() as f64;
            let mut w = vec![0.0; k];
            for &j in &support {
                w[j] = v[j] - shift;
            }
            if w.iter().any(|&x| x < -1e-15) {
                continue;
            }
            let d: f64 = w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, w));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn projection_examples() {
        let on = [0.2, 0.3, 0.5];
        let p = project_to_simplex(&on).unwrap();
        for (a, b) in p.as_slice().iter().zip(on) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(
            project_to_simplex(&[2.0, 0.0]).unwrap().as_slice(),
            [1.0, 0.0]
        );
        assert_eq!(
            project_to_simplex(&[0.0, 0.0]).unwrap().as_slice(),
            [0.5, 0.5]
        );
        assert!(project_to_simplex(&[]).is_err());
        assert!(project_to_simplex(&[f64::NAN]).is_err());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        let json = serde_json::to_string(&WeightVector::uniform(4)).unwrap();
        assert_eq!(json, "[0.25,0.25,0.25,0.25]");
        assert!(serde_json::from_str::<WeightVector>("[0.9,0.2]").is_err());
    }

    #[test]
    fn single_point_simplex() {
        let r = maximize_on_simplex(|w| w[0], 1, &OptimizerConfig::default()).unwrap();
        assert_eq!(r.weights.as_slice(), [1.0]);
        assert_eq!(r.converged_reason, StopReason::SinglePoint);
    }

    #[test]
    fn smooth_concave_maximizer() {
        let target = [0.3, 0.7];
        let f = |w: &[f64]| {
            -w.iter()
                .zip(target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let r = maximize_on_simplex(f, 2, &OptimizerConfig::default()).unwrap();
        for (a, b) in r.weights.as_slice().iter().zip(target) {
            assert!((a - b).abs() < 1e-3, "{:?}", r.weights);
        }
    }

    #[test]
    fn step_objective_reaches_planted_vertex() {
        // accuracy of the rounded weighted vote where column 1 matches y exactly
        let y = [1u8, 0, 1, 1, 0, 0, 1, 0];
        let cols = [
            [0u8, 0, 1, 0, 1, 0, 0, 1],
            [1, 0, 1, 1, 0, 0, 1, 0],
            [1, 1, 1, 1, 0, 1, 0, 0],
        ];
        let f = |w: &[f64]| {
            (0..y.len())
                .filter(|&i| {
                    let s: f64 = (0..3).map(|j| w[j] * cols[j][i] as f64).sum();
                    u8::from((s + 0.5).floor() >= 1.0) == y[i]
                })
                .count() as f64
                / y.len() as f64
        };
        // grid enumeration confirms 1.0 is attainable
        let mut grid_best: f64 = 0.0;
        for a in 0..=20 {
            for b in 0..=(20 - a) {
                let w = [a as f64 / 20.0, b as f64 / 20.0, (20 - a - b) as f64 / 20.0];
                grid_best = grid_best.max(f(&w));
            }
        }
        assert_eq!(grid_best, 1.0);
        let r = maximize_on_simplex(f, 3, &OptimizerConfig::default()).unwrap();
        assert_eq!(r.objective_value, 1.0);
        assert!(r.objective_value >= r.baseline_value);
    }

    #[test]
    fn non_finite_objective_errors() {
        let r = maximize_on_simplex(
            |w| if w[0] > 0.9 { f64::NAN } else { w[0] },
            3,
            &OptimizerConfig::default(),
        );
        assert!(matches!(r, Err(Error::NonFiniteObjective)));
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |w: &[f64]| (w[0] * 7.0).sin() + (w[1] * 3.0).cos() * w[2];
        let cfg = OptimizerConfig::default().with_seed(11);
        assert_eq!(
            maximize_on_simplex(f, 4, &cfg).unwrap(),
            maximize_on_simplex(f, 4, &cfg).unwrap()
        );
    }

    #[test]
    fn respects_budget() {
        let f = |w: &[f64]| -(w[0] - 0.123).powi(2);
        let cfg = OptimizerConfig {
            budget_per_start: Some(10),
            ..Default::default()
        };
        let r = maximize_on_simplex(f, 3, &cfg).unwrap();
        // setup (1 + k + random starts) plus at most 10 per start
        assert!(r.evaluations <= 1 + 3 + 3 + 10 * (1 + 3 + 3));
    }

    proptest! {
        #[test]
        fn projection_matches_support_enumeration(v in proptest::collection::vec(-2.0f64..2.0, 1..7)) {
            let p = project_to_simplex(&v).unwrap();
            let oracle = projection_by_support(&v);
            for (a, b) in p.as_slice().iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let again = project_to_simplex(p.as_slice()).unwrap();
            for (a, b) in again.as_slice().iter().zip(p.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        }

        #[test]
        fn never_worse_than_uniform(seed: u64, k in 2usize..8, centre in proptest::collection::vec(0.0f64..1.0, 8)) {
            let f = |w: &[f64]| {
                w.iter().zip(&centre).map(|(a, c)| ((a - c) * 9.0).sin()).sum::<f64>()
            };
            let r = maximize_on_simplex(f, k, &OptimizerConfig::default().with_seed(seed)).unwrap();
            prop_assert!(r.objective_value >= r.baseline_value);
            prop_assert!(WeightVector::new(r.weights.as_slice().to_vec()).is_ok());
            prop_assert_eq!(r.objective_value, f(r.weights.as_slice()));
        }
    }
}
