use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::rng;
use crate::{Error, Result};

/// Two unit-covariance Gaussians centred at `+/- separation * u`, with
/// `u = (1, ..., 1) / sqrt(p)`, plus symmetric label noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    /// Fraction of class-1 rows before label noise.
    pub balance: f64,
    pub separation: f64,
    /// Probability of flipping each label.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 400,
            p: 8,
            balance: 0.5,
            separation: 1.0,
            noise: 0.0,
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.n < 20 || spec.p < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs n >= 20 and p >= 2, got n = {}, p = {}",
            spec.n, spec.p
        )));
    }
    if !(spec.balance > 0.0 && spec.balance < 1.0) {
        return Err(Error::InvalidParameter("balance must lie in (0, 1)".into()));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0) {
        return Err(Error::InvalidParameter(
            "separation must be finite and >= 0".into(),
        ));
    }
    if !(0.0..=0.5).contains(&spec.noise) {
        return Err(Error::InvalidParameter("noise must lie in [0, 0.5]".into()));
    }

    let mut r = rng(seed);
    let ones = ((spec.balance * spec.n as f64).round() as usize).clamp(1, spec.n - 1);
    let mut labels: Vec<u8> = (0..spec.n).map(|i| u8::from(i < ones)).collect();
    labels.shuffle(&mut r);

    let shift = spec.separation / (spec.p as f64).sqrt();
    let mut flat = Vec::with_capacity(spec.n * spec.p);
    for &y in &labels {
        let centre = if y == 1 { shift } else { -shift };
        flat.extend((0..spec.p).map(|_| centre + r.sample::<f64, _>(StandardNormal)));
    }
    for y in labels.iter_mut() {
        if r.random::<f64>() < spec.noise {
            *y = 1 - *y;
        }
    }
    let names = (0..spec.p).map(|j| format!("x{j}")).collect();
    Dataset::from_flat(flat, spec.n, spec.p, labels, names, "synthetic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_split;
    use crate::tree::{fit_tree, predict_tree, TreeConfig};

    #[test]
    fn deterministic() {
        let s = SyntheticSpec::default();
        assert_eq!(
            generate_synthetic(&s, 3).unwrap(),
            generate_synthetic(&s, 3).unwrap()
        );
        assert_ne!(
            generate_synthetic(&s, 3).unwrap(),
            generate_synthetic(&s, 4).unwrap()
        );
    }

    #[test]
    fn rejects_degenerate_specs() {
        let bad = [
            SyntheticSpec {
                n: 10,
                ..Default::default()
            },
            SyntheticSpec {
                p: 1,
                ..Default::default()
            },
            SyntheticSpec {
                balance: 1.0,
                ..Default::default()
            },
            SyntheticSpec {
                noise: 0.7,
                ..Default::default()
            },
            SyntheticSpec {
                separation: f64::NAN,
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec, 0).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn balance_is_exact_without_noise() {
        let s = SyntheticSpec {
            n: 200,
            balance: 0.8,
            ..Default::default()
        };
        let d = generate_synthetic(&s, 1).unwrap();
        assert_eq!(d.class_counts(), [40, 160]);
    }

    #[test]
    fn zero_separation_is_uninformative() {
        // the best achievable accuracy is the majority share; a fitted tree
        // should not beat it by more than sampling error on held-out rows
        let s = SyntheticSpec {
            n: 2000,
            balance: 0.7,
            separation: 0.0,
            ..Default::default()
        };
        let d = generate_synthetic(&s, 5).unwrap();
        let split = make_split(&d, 0.25, 5, 5).unwrap();
        let cfg = TreeConfig {
            max_depth: 2,
            mtry: 8,
            min_samples_split: 2,
            seed: 1,
        };
        let t = fit_tree(&d, &split.train_indices, &cfg).unwrap();
        let acc = split
            .test_indices
            .iter()
            .filter(|&&i| predict_tree(&t, d.row(i)).class == d.label(i))
            .count() as f64
            / split.test_indices.len() as f64;
        assert!((acc - 0.7).abs() < 0.05, "{acc}");
    }

    #[test]
    fn well_separated_depth_three_tree() {
        // Bayes accuracy is Phi(3) ~ 0.9987
        let s = SyntheticSpec {
            n: 1000,
            p: 2,
            separation: 3.0,
            ..Default::default()
        };
        let d = generate_synthetic(&s, 2).unwrap();
        let split = make_split(&d, 0.25, 5, 2).unwrap();
        let cfg = TreeConfig {
            max_depth: 3,
            mtry: 2,
            min_samples_split: 2,
            seed: 0,
        };
        let t = fit_tree(&d, &split.train_indices, &cfg).unwrap();
        let acc = split
            .test_indices
            .iter()
            .filter(|&&i| predict_tree(&t, d.row(i)).class == d.label(i))
            .count() as f64
            / split.test_indices.len() as f64;
        assert!(acc >= 0.9, "{acc}");
    }
}
