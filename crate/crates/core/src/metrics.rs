//! Evaluation primitives: confusion counts, MAE and rank-based AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(preds: &[bool], labels: &[bool]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: preds.len(),
            });
        }
        if preds.is_empty() {
            return Err(Error::Empty("predictions"));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (precision, precision_undefined) = ratio(self.tp, self.tp + self.fp);
        let (recall, recall_undefined) = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let accuracy = (self.tp + self.tn) as f64 / self.total().max(1) as f64;
        ClassificationMetrics {
            precision,
            recall,
            f1,
            accuracy,
            precision_undefined,
            recall_undefined,
        }
    }
}

/// Precision, recall, F1 and accuracy. A zero denominator yields 0 with
/// the matching `*_undefined` flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

pub fn classification_metrics(preds: &[bool], labels: &[bool]) -> Result<ClassificationMetrics> {
    Ok(ConfusionCounts::from_predictions(preds, labels)?.metrics())
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("mae inputs"));
    }
    let total: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / preds.len() as f64)
}

/// Mann-Whitney AUC with midranks, so tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi && !yj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_predictions() {
        let y = [true, false, true, false];
        let m = classification_metrics(&y, &y).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn real_pair_baseline_row() {
        let c = ConfusionCounts { tp: 1, fp: 0, tn: 0, fn_: 1 };
        let m = c.metrics();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn zero_denominator_flags() {
        let m = classification_metrics(&[false, false], &[false, true]).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.precision_undefined);
        assert!(!m.recall_undefined);
        assert!(classification_metrics(&[], &[]).is_err());
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mae(&[1.5, 2.5, -0.5], &[1.0, 2.0, -1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn auc_edge_values() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::AucUndefined)));
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
            prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
            let a = auc(&scores, &labels).unwrap();
            prop_assert!((a - brute_auc(&scores, &labels)).abs() < 1e-10);
            // strictly monotone transform
            let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((auc(&t, &labels).unwrap() - a).abs() < 1e-12);
        }

        #[test]
        fn confusion_matches_counting(data in prop::collection::vec((any::<bool>(), any::<bool>()), 1..50)) {
            let p: Vec<bool> = data.iter().map(|d| d.0).collect();
            let y: Vec<bool> = data.iter().map(|d| d.1).collect();
            let m = classification_metrics(&p, &y).unwrap();
            let tp = data.iter().filter(|d| d.0 && d.1).count() as f64;
            let fp = data.iter().filter(|d| d.0 && !d.1).count() as f64;
            let fneg = data.iter().filter(|d| !d.0 && d.1).count() as f64;
            let tn = data.iter().filter(|d| !d.0 && !d.1).count() as f64;
            prop_assert_eq!(m.accuracy, (tp + tn) / data.len() as f64);
            if tp + fp > 0.0 { prop_assert_eq!(m.precision, tp / (tp + fp)); }
            if tp + fneg > 0.0 { prop_assert_eq!(m.recall, tp / (tp + fneg)); }
            prop_assert!((0.0..=1.0).contains(&m.accuracy));
            if m.precision > 0.0 && m.recall > 0.0 {
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
            }
        }

        #[test]
        fn mae_symmetric(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..30)) {
            let a: Vec<f64> = v.iter().map(|x| x.0).collect();
            let b: Vec<f64> = v.iter().map(|x| x.1).collect();
            let oracle = v.iter().map(|x| (x.0 - x.1).abs()).sum::<f64>() / v.len() as f64;
            prop_assert!((mae(&a, &b).unwrap() - oracle).abs() < 1e-12);
            prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
        }
    }
}
