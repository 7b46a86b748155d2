//! CART trees: Gini for classification, variance reduction for regression.

use std::collections::VecDeque;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Probability above which a classification leaf predicts the positive class.
    pub decision_threshold: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_leaf: 2,
            decision_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity of the two children.
    pub child_impurity: f64,
    pub left: Box<TreeNode>,
    pub right: Box<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub depth: usize,
    pub n_samples: usize,
    /// Weight of negative and positive samples (classification) or total weight twice (regression).
    pub class_weight: [f64; 2],
    /// Leaf prediction: positive-class probability or mean target.
    pub value: f64,
    pub impurity: f64,
    pub split: Option<TreeSplit>,
}

pub fn gini(positive_weight: f64, total_weight: f64) -> f64 {
    if total_weight <= 0.0 {
        return 0.0;
    }
    let p = positive_weight / total_weight;
    2.0 * p * (1.0 - p)
}

/// Weighted variance from sums: `Σw`, `Σw·y`, `Σw·y²`.
pub fn weighted_variance(w: f64, wy: f64, wyy: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let mean = wy / w;
    (wyy / w - mean * mean).max(0.0)
}

#[derive(Clone, Copy, Default)]
struct Sums {
    n: usize,
    w: f64,
    wy: f64,
    wyy: f64,
}

impl Sums {
    fn add(&mut self, w: f64, y: f64) {
        self.n += 1;
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
    }

    fn sub(&mut self, w: f64, y: f64) {
        self.n -= 1;
        self.w -= w;
        self.wy -= w * y;
        self.wyy -= w * y * y;
    }

    fn impurity(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Gini => gini(self.wy, self.w),
            Criterion::Variance => weighted_variance(self.w, self.wy, self.wyy),
        }
    }
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    w: &'a [f64],
    criterion: Criterion,
    cfg: TreeConfig,
}

impl Builder<'_> {
    fn sums(&self, idx: &[usize]) -> Sums {
        let mut s = Sums::default();
        for &i in idx {
            s.add(self.w[i], self.y[i]);
        }
        s
    }

    /// Best (feature, threshold, child impurity); ties keep the earliest candidate.
    fn best_split(&self, idx: &[usize], parent: &Sums) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            let col = self.x.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left = Sums::default();
            let mut right = *parent;
            for k in 0..order.len() - 1 {
                let i = order[k];
                left.add(self.w[i], self.y[i]);
                right.sub(self.w[i], self.y[i]);
                let (a, b) = (col[i], col[order[k + 1]]);
                if a == b || left.n < self.cfg.min_leaf || right.n < self.cfg.min_leaf {
                    continue;
                }
                let child = (left.w * left.impurity(self.criterion) + right.w * right.impurity(self.criterion)) / parent.w;
                if best.is_none_or(|(_, _, c)| child < c) {
                    best = Some((f, 0.5 * (a + b), child));
                }
            }
        }
        best
    }

    fn build(&self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let s = self.sums(&idx);
        let impurity = s.impurity(self.criterion);
        let value = if s.w > 0.0 { s.wy / s.w } else { 0.0 };
        let class_weight = match self.criterion {
            Criterion::Gini => [s.w - s.wy, s.wy],
            Criterion::Variance => [s.w, s.w],
        };
        let mut node = TreeNode {
            depth,
            n_samples: idx.len(),
            class_weight,
            value,
            impurity,
            split: None,
        };
        if depth >= self.cfg.max_depth || impurity <= 1e-15 || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return node;
        }
        let Some((feature, threshold, child_impurity)) = self.best_split(&idx, &s) else {
            return node;
        };
        if child_impurity > impurity {
            return node;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
        node.split = Some(TreeSplit {
            feature,
            threshold,
            child_impurity,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        });
        node
    }
}

/// Grow a tree greedily. `y` holds 0/1 labels for Gini, real targets for variance.
pub fn dt_train(
    x: &Array2<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    criterion: Criterion,
    cfg: &TreeConfig,
) -> Result<TreeNode> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("tree training samples"));
    }
    if criterion == Criterion::Gini && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter("classification labels must be 0 or 1".into()));
    }
    let ones = vec![1.0; y.len()];
    let w = weights.unwrap_or(&ones);
    if w.len() != y.len() || w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("sample weights must be non-negative, one per sample".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("tree inputs must be finite".into()));
    }
    let b = Builder {
        x,
        y,
        w,
        criterion,
        cfg: *cfg,
    };
    Ok(b.build((0..y.len()).collect(), 0))
}

impl TreeNode {
    pub fn leaf_for(&self, sample: ArrayView1<f64>) -> &TreeNode {
        let mut node = self;
        while let Some(s) = &node.split {
            node = if sample[s.feature] <= s.threshold { &s.left } else { &s.right };
        }
        node
    }

    pub fn max_feature(&self) -> Option<usize> {
        let s = self.split.as_ref()?;
        Some(
            [Some(s.feature), s.left.max_feature(), s.right.max_feature()]
                .into_iter()
                .flatten()
                .max()
                .unwrap(),
        )
    }

    pub fn depth(&self) -> usize {
        match &self.split {
            None => self.depth,
            Some(s) => s.left.depth().max(s.right.depth()),
        }
    }

    pub fn n_internal(&self) -> usize {
        match &self.split {
            None => 0,
            Some(s) => 1 + s.left.n_internal() + s.right.n_internal(),
        }
    }

    /// Indented dump of splits and class weights.
    pub fn export_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.write_text(names, &mut out);
        out
    }

    fn write_text(&self, names: &[String], out: &mut String) {
        let pad = "|   ".repeat(self.depth);
        match &self.split {
            None => {
                let _ = writeln!(
                    out,
                    "{pad}leaf: value={:.4} n={} weight=[{:.2}, {:.2}]",
                    self.value, self.n_samples, self.class_weight[0], self.class_weight[1]
                );
            }
            Some(s) => {
                let name = names.get(s.feature).cloned().unwrap_or_else(|| format!("x{}", s.feature));
                let _ = writeln!(out, "{pad}{name} <= {:.4}", s.threshold);
                s.left.write_text(names, out);
                let _ = writeln!(out, "{pad}{name} > {:.4}", s.threshold);
                s.right.write_text(names, out);
            }
        }
    }
}

pub fn dt_predict(tree: &TreeNode, sample: ArrayView1<f64>, width: usize) -> Result<f64> {
    if sample.len() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: sample.len(),
        });
    }
    Ok(tree.leaf_for(sample).value)
}

/// First `k` internal splits in breadth-first order as `(feature name, depth)`.
pub fn dt_top_splits(tree: &TreeNode, names: &[String], k: usize) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([tree]);
    while let Some(node) = queue.pop_front() {
        if out.len() >= k {
            break;
        }
        if let Some(s) = &node.split {
            let name = names.get(s.feature).cloned().unwrap_or_else(|| format!("x{}", s.feature));
            out.push((name, node.depth));
            queue.push_back(&s.left);
            queue.push_back(&s.right);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    fn cfg(max_depth: usize, min_leaf: usize) -> TreeConfig {
        TreeConfig {
            max_depth,
            min_leaf,
            ..Default::default()
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(0.0, 4.0), 0.0);
        assert_eq!(gini(4.0, 4.0), 0.0);
        assert_eq!(gini(2.0, 4.0), 0.5);
    }

    #[test]
    fn separable_one_feature() {
        let x = array![[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]];
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let t = dt_train(&x, &y, None, Criterion::Gini, &TreeConfig::default()).unwrap();
        let s = t.split.as_ref().unwrap();
        assert!(s.threshold > 0.3 && s.threshold < 0.7);
        assert_eq!(t.depth(), 1);
        for (r, &label) in y.iter().enumerate() {
            assert_eq!(dt_predict(&t, x.row(r), 1).unwrap(), label);
        }
        let names = vec!["age".to_string()];
        assert_eq!(dt_top_splits(&t, &names, 5), vec![("age".to_string(), 0)]);
        assert!(t.export_text(&names).contains("age <= 0.5000"));
    }

    #[test]
    fn single_class_gives_prior_leaf() {
        let x = array![[0.0], [1.0], [2.0]];
        let t = dt_train(&x, &[1.0, 1.0, 1.0], None, Criterion::Gini, &TreeConfig::default()).unwrap();
        assert!(t.split.is_none());
        assert_eq!(dt_predict(&t, x.row(0), 1).unwrap(), 1.0);
        assert!(dt_predict(&t, array![1.0, 2.0].view(), 1).is_err());
    }

    #[test]
    fn variance_split_and_weights() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [1.0, 1.0, 5.0, 5.0];
        let t = dt_train(&x, &y, None, Criterion::Variance, &cfg(3, 1)).unwrap();
        assert!((t.split.as_ref().unwrap().threshold - 1.5).abs() < 1e-12);
        assert_eq!(dt_predict(&t, array![2.5].view(), 1).unwrap(), 5.0);
        let w = [1.0, 3.0, 0.0, 0.0];
        let t = dt_train(&x, &[0.0, 1.0, 0.0, 0.0], Some(&w), Criterion::Gini, &cfg(0, 1)).unwrap();
        assert!((t.value - 0.75).abs() < 1e-12);
    }

    /// Exhaustive root split: every feature, every midpoint, impurity recomputed from scratch.
    fn brute_best_gini(x: &Array2<f64>, y: &[f64], min_leaf: usize) -> Option<f64> {
        let n = y.len() as f64;
        let mut best: Option<f64> = None;
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(f).to_vec();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let side = |left: bool| -> (f64, f64) {
                    let ys: Vec<f64> = (0..y.len()).filter(|&i| (x[[i, f]] <= t) == left).map(|i| y[i]).collect();
                    let m = ys.len() as f64;
                    let p = if m > 0.0 { ys.iter().sum::<f64>() / m } else { 0.0 };
                    (m, 1.0 - p * p - (1.0 - p) * (1.0 - p))
                };
                let ((nl, gl), (nr, gr)) = (side(true), side(false));
                if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                    continue;
                }
                let g = (nl * gl + nr * gr) / n;
                best = Some(best.map_or(g, |b: f64| b.min(g)));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn root_split_matches_exhaustive_search(
            rows in prop::collection::vec((prop::collection::vec(0u8..5, 3), any::<bool>()), 2..=6),
        ) {
            let x = Array2::from_shape_fn((rows.len(), 3), |(i, j)| rows[i].0[j] as f64);
            let y: Vec<f64> = rows.iter().map(|r| r.1 as u8 as f64).collect();
            prop_assume!(y.iter().any(|&v| v == 1.0) && y.iter().any(|&v| v == 0.0));
            let t = dt_train(&x, &y, None, Criterion::Gini, &cfg(1, 1)).unwrap();
            match (brute_best_gini(&x, &y, 1), &t.split) {
                (Some(b), Some(s)) => prop_assert!((s.child_impurity - b).abs() < 1e-10),
                (None, None) => {}
                (b, s) => prop_assert!(false, "oracle {:?} vs tree {:?}", b, s.is_some()),
            }
        }

        #[test]
        fn splits_never_raise_impurity_and_accuracy_grows_with_depth(
            rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 2), any::<bool>()), 4..40),
        ) {
            let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i].0[j]);
            let y: Vec<f64> = rows.iter().map(|r| r.1 as u8 as f64).collect();
            let acc = |t: &TreeNode| -> usize {
                (0..y.len()).filter(|&r| ((dt_predict(t, x.row(r), 2).unwrap() > 0.5) as u8 as f64) == y[r]).count()
            };
            let mut prev = 0;
            for depth in 0..6 {
                let t = dt_train(&x, &y, None, Criterion::Gini, &cfg(depth, 1)).unwrap();
                prop_assert!(t.depth() <= depth);
                fn check(n: &TreeNode) -> bool {
                    match &n.split {
                        None => (0.0..=1.0).contains(&n.value),
                        Some(s) => s.child_impurity <= n.impurity + 1e-12 && check(&s.left) && check(&s.right),
                    }
                }
                prop_assert!(check(&t));
                let a = acc(&t);
                prop_assert!(a >= prev);
                prev = a;
            }
        }

        #[test]
        fn descent_follows_recorded_splits(
            sample in prop::collection::vec(-3.0f64..3.0, 2),
            rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 2), any::<bool>()), 4..30),
        ) {
            let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i].0[j]);
            let y: Vec<f64> = rows.iter().map(|r| r.1 as u8 as f64).collect();
            let t = dt_train(&x, &y, None, Criterion::Gini, &TreeConfig::default()).unwrap();
            let s = Array1::from(sample);
            let mut node = &t;
            while let Some(sp) = &node.split {
                node = if s[sp.feature] <= sp.threshold { &sp.left } else { &sp.right };
            }
            prop_assert_eq!(node.value, dt_predict(&t, s.view(), 2).unwrap());
        }
    }
}
