use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pair;
use crate::error::{Error, Result};
use crate::seed;

/// Disjoint train/validation/test partition of undirected pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train: Vec<(usize, usize)>,
    pub validation: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
    pub seed: u64,
}

pub const MIN_SPLIT_EDGES: usize = 5;

/// Shuffle distinct pairs and cut them at rounded `ratios` boundaries; the
/// test part takes the remainder.
pub fn split_edges(pairs: &[(usize, usize)], ratios: (f64, f64, f64), seed: u64) -> Result<EdgeSplit> {
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test].iter().any(|r| !(0.0..=1.0).contains(r))
        || ((r_train + r_val + r_test) - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidParameter(format!("split ratios {ratios:?} must sum to 1")));
    }
    let mut all: Vec<_> = pairs.iter().map(|&(a, b)| pair(a, b)).collect();
    all.sort_unstable();
    all.dedup();
    if all.len() < MIN_SPLIT_EDGES {
        return Err(Error::TooFewEdges {
            needed: MIN_SPLIT_EDGES,
            got: all.len(),
        });
    }
    let mut rng = seed::rng(seed);
    all.shuffle(&mut rng);
    let n = all.len();
    let n_train = ((n as f64 * r_train).round() as usize).min(n);
    let n_val = ((n as f64 * r_val).round() as usize).min(n - n_train);
    let test = all.split_off(n_train + n_val);
    let validation = all.split_off(n_train);
    Ok(EdgeSplit {
        train: all,
        validation,
        test,
        seed,
    })
}
