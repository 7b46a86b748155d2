use ndarray::Array2;

use super::model::{logistic, Embeddings};
use crate::error::{Error, Result};

pub const PROB_EPS: f64 = 1e-7;

/// Scored node pairs with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBatch {
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<f64>,
    pub predictions: Vec<f64>,
}

impl LinkBatch {
    pub fn new(pairs: Vec<(usize, usize)>, labels: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        if pairs.len() != labels.len() || pairs.len() != predictions.len() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                got: labels.len().min(predictions.len()),
            });
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        Ok(LinkBatch {
            pairs,
            labels,
            predictions,
        })
    }

    /// Score `pairs` with the inner-product decoder.
    pub fn score(z: &Embeddings, pairs: Vec<(usize, usize)>, labels: Vec<f64>) -> Result<Self> {
        let predictions = pairs
            .iter()
            .map(|&(i, j)| logistic(z.row(i).dot(&z.row(j))))
            .collect();
        LinkBatch::new(pairs, labels, predictions)
    }
}

/// Mean binary cross-entropy with predictions clamped to `[ε, 1−ε]`.
pub fn bce_loss(batch: &LinkBatch) -> Result<f64> {
    if batch.labels.is_empty() {
        return Err(Error::Empty("link batch"));
    }
    let total: f64 = batch
        .labels
        .iter()
        .zip(&batch.predictions)
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / batch.labels.len() as f64)
}

/// Loss and `∂L/∂z` for the inner-product decoder. The clamp is part of
/// the loss, so clamped samples contribute zero gradient.
pub fn link_loss_grad(
    z: &Array2<f64>,
    pairs: &[(usize, usize)],
    labels: &[f64],
) -> Result<(f64, Array2<f64>)> {
    if pairs.is_empty() {
        return Err(Error::Empty("link batch"));
    }
    let n = pairs.len() as f64;
    let mut loss = 0.0;
    let mut dz = Array2::zeros(z.dim());
    for (&(i, j), &y) in pairs.iter().zip(labels) {
        let s = z.row(i).dot(&z.row(j));
        let p = logistic(s);
        let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        if p > PROB_EPS && p < 1.0 - PROB_EPS {
            let g = (p - y) / n;
            let zj = z.row(j).to_owned();
            let zi = z.row(i).to_owned();
            dz.row_mut(i).scaled_add(g, &zj);
            dz.row_mut(j).scaled_add(g, &zi);
        }
    }
    Ok((loss / n, dz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn batch(labels: Vec<f64>, preds: Vec<f64>) -> LinkBatch {
        let pairs = (0..labels.len()).map(|i| (i, i)).collect();
        LinkBatch::new(pairs, labels, preds).unwrap()
    }

    #[test]
    fn exact_predictions_near_zero_loss() {
        let l = bce_loss(&batch(vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0])).unwrap();
        assert!(l < 1e-6);
    }

    #[test]
    fn half_probability_is_ln2() {
        let l = bce_loss(&batch(vec![1.0], vec![0.5])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(bce_loss(&batch(vec![], vec![])).is_err());
        assert!(LinkBatch::new(vec![(0, 1)], vec![0.5], vec![0.5]).is_err());
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let mut rng = seed::rng(5);
        for _ in 0..20 {
            let n = rng.random_range(1..30);
            let labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let preds: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut oracle = 0.0;
            for k in 0..n {
                let p = preds[k].clamp(1e-7, 1.0 - 1e-7);
                oracle += if labels[k] == 1.0 { -p.ln() } else { -(1.0 - p).ln() };
            }
            oracle /= n as f64;
            let l = bce_loss(&batch(labels, preds)).unwrap();
            assert!((l - oracle).abs() < 1e-12);
            assert!(l >= 0.0);
        }
    }
}
