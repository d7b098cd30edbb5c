//! Accuracy and ROC AUC.

use crate::{Error, Result};

pub fn accuracy(y: &[u8], yhat: &[u8]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = y.iter().zip(yhat).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney rank sum. Tied scores get
/// their average rank, which credits each tied positive/negative pair 0.5.
pub fn auc(y: &[u8], scores: &[f64]) -> Result<f64> {
    if y.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    Ok(auc_with_buffer(y, scores, n_pos, &mut order))
}

/// Rank-sum AUC reusing `order` as scratch. Caller guarantees both classes occur.
pub(crate) fn auc_with_buffer(
    y: &[u8],
    scores: &[f64],
    n_pos: usize,
    order: &mut Vec<usize>,
) -> f64 {
    let n = y.len();
    order.clear();
    order.extend(0..n);
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // ranks are 1-based; a tie group spanning [start, end) has midrank (start + end + 1) / 2
    let mut pos_rank_sum2 = 0u64; // twice the rank sum, kept integral
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos_in_group = order[start..end].iter().filter(|&&i| y[i] == 1).count() as u64;
        pos_rank_sum2 += pos_in_group * (start + end + 1) as u64;
        start = end;
    }
    let n_pos = n_pos as u64;
    let n_neg = n as u64 - n_pos;
    // 2U = 2R - n_pos(n_pos + 1)
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    u2 as f64 / (2 * n_pos * n_neg) as f64
}

/// ROC points `(false positive rate, true positive rate)` from the strictest
/// threshold to the loosest, starting at `(0, 0)`.
pub fn roc_curve(y: &[u8], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    auc(y, scores)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (idx, &i) in order.iter().enumerate() {
        if y[i] == 1 {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        let boundary = order
            .get(idx + 1)
            .is_none_or(|&next| scores[next] != scores[i]);
        if boundary {
            points.push((fp / n_neg, tp / n_pos));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(y: &[u8], s: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    total += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 1, 1, 1]).unwrap(), 0.5);
        assert_eq!(accuracy(&[0, 0, 0], &[1, 1, 1]).unwrap(), 0.0);
        assert!(matches!(
            accuracy(&[1], &[1, 0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(accuracy(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&[0, 1], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(matches!(
            auc(&[1, 1], &[0.1, 0.2]),
            Err(Error::AucUndefined)
        ));
    }

    #[test]
    fn roc_curve_area_matches_auc() {
        let y = [0, 1, 1, 0, 1, 0, 0, 1];
        let s = [0.1, 0.4, 0.4, 0.35, 0.8, 0.7, 0.2, 0.9];
        let pts = roc_curve(&y, &s).unwrap();
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        let area: f64 = pts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum();
        assert!((area - auc(&y, &s).unwrap()).abs() < 1e-12);
    }

    fn labelled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (2usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec((0u8..5).prop_map(|v| v as f64 / 4.0), n),
            )
                .prop_map(|(mut y, s)| {
                    y[0] = 0;
                    y[1] = 1;
                    (y, s)
                })
        })
    }

    proptest! {
        #[test]
        fn matches_pairwise((y, s) in labelled_scores()) {
            prop_assert!((auc(&y, &s).unwrap() - pairwise(&y, &s)).abs() <= 1e-12);
        }

        #[test]
        fn complement_under_negation((y, s) in labelled_scores()) {
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auc(&y, &s).unwrap() - (1.0 - auc(&y, &neg).unwrap())).abs() <= 1e-12);
        }

        #[test]
        fn invariant_under_monotone_transform((y, s) in labelled_scores()) {
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(auc(&y, &s).unwrap(), auc(&y, &t).unwrap());
        }

        #[test]
        fn constant_scores_give_half((y, _) in labelled_scores(), c in -3.0f64..3.0) {
            let s = vec![c; y.len()];
            prop_assert_eq!(auc(&y, &s).unwrap(), 0.5);
        }

        #[test]
        fn accuracy_identity_and_complement(y in proptest::collection::vec(0u8..2, 1..40)) {
            let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
            prop_assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
            prop_assert_eq!(accuracy(&y, &flipped).unwrap(), 0.0);
        }
    }
}
