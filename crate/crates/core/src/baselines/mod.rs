//! Non-graph baselines trained on concatenated endpoint features.

mod mlp;
mod tree;

pub use mlp::{mlp_loss, mlp_loss_gradient, mlp_predict, mlp_train, MlpConfig, MlpLayer, MlpObjective, MlpParams};
pub use tree::{
    dt_predict, dt_top_splits, dt_train, gini, weighted_variance, Criterion, TreeConfig, TreeNode, TreeSplit,
};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Rows `[features(u) ; features(v)]` with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSamples {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
}

impl PairSamples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub fn make_pair_samples(pairs: &[(usize, usize)], labels: &[f64], features: &Array2<f64>) -> Result<PairSamples> {
    if pairs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            got: labels.len(),
        });
    }
    let (n, f) = features.dim();
    let mut x = Array2::zeros((pairs.len(), 2 * f));
    for (r, &(u, v)) in pairs.iter().enumerate() {
        for node in [u, v] {
            if node >= n {
                return Err(Error::UnknownPid(format!("node index {node}")));
            }
        }
        x.row_mut(r).slice_mut(ndarray::s![..f]).assign(&features.row(u));
        x.row_mut(r).slice_mut(ndarray::s![f..]).assign(&features.row(v));
    }
    Ok(PairSamples {
        x,
        y: labels.to_vec(),
        pairs: pairs.to_vec(),
    })
}

/// Feature names for pair samples: `src:<name>` then `dst:<name>`.
pub fn pair_feature_names(names: &[String]) -> Vec<String> {
    names
        .iter()
        .map(|n| format!("src:{n}"))
        .chain(names.iter().map(|n| format!("dst:{n}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn concatenates_source_then_destination() {
        let f = array![[1.0, 0.0], [0.0, 1.0]];
        let s = make_pair_samples(&[(0, 1)], &[1.0], &f).unwrap();
        assert_eq!(s.x.row(0).to_vec(), vec![1.0, 0.0, 0.0, 1.0]);
        assert!(make_pair_samples(&[], &[], &f).unwrap().is_empty());
        assert!(make_pair_samples(&[(0, 2)], &[1.0], &f).is_err());
        assert_eq!(pair_feature_names(&["a".into()]), vec!["src:a", "dst:a"]);
    }

    proptest! {
        #[test]
        fn sample_width_is_twice_features(f in 1usize..6, pairs in prop::collection::vec((0usize..4, 0usize..4), 0..10)) {
            let feats = Array2::from_shape_fn((4, f), |(i, j)| (i * 10 + j) as f64);
            let labels = vec![0.0; pairs.len()];
            let s = make_pair_samples(&pairs, &labels, &feats).unwrap();
            prop_assert_eq!(s.x.ncols(), 2 * f);
            prop_assert_eq!(s.x.nrows(), pairs.len());
        }
    }
}
