//! Fully connected network: ReLU hidden layers, logistic output, Adam.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gat::{logistic, PROB_EPS};
use crate::optim::{Adam, AdamConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlpObjective {
    /// Binary cross-entropy on 0/1 labels.
    Bce,
    /// Squared error between the logistic output and a target in [0, 1].
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub objective: MlpObjective,
    pub decision_threshold: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64, 32],
            lr: 0.01,
            epochs: 300,
            weight_decay: 0.0,
            objective: MlpObjective::Bce,
            decision_threshold: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpLayer {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<MlpLayer>,
}

impl MlpParams {
    pub fn init(in_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if in_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidParameter("layer widths must be positive".into()));
        }
        let mut rng = seed::stage_rng(seed, "mlp-init");
        let mut sizes = vec![in_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                MlpLayer {
                    weight: Array2::from_shape_simple_fn((w[1], w[0]), || rng.random_range(-limit..limit)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(MlpParams { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        MlpParams {
            layers: sizes
                .windows(2)
                .map(|w| MlpLayer {
                    weight: Array2::zeros((w[1], w[0])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.in_dim()];
        s.extend(self.layers.iter().map(|l| l.weight.nrows()));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in &mut self.layers {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v = *it.next().expect("flat parameter vector too short");
            }
        }
    }

    pub fn param_name(&self, mut idx: usize) -> String {
        for (k, l) in self.layers.iter().enumerate() {
            if idx < l.weight.len() {
                let c = l.weight.ncols();
                return format!("mlp.layer{}.W[{},{}]", k + 1, idx / c, idx % c);
            }
            idx -= l.weight.len();
            if idx < l.bias.len() {
                return format!("mlp.layer{}.b[{idx}]", k + 1);
            }
            idx -= l.bias.len();
        }
        format!("mlp.out_of_range[{idx}]")
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got,
            });
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer; the last activation is the logit.
    fn forward(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = vec![x.clone()];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let a = act[k].dot(&l.weight.t()) + &l.bias;
            let h = if k == last { a.clone() } else { a.mapv(|v| v.max(0.0)) };
            pre.push(a);
            act.push(h);
        }
        (pre, act)
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_width(x.ncols())?;
        let (_, act) = self.forward(x);
        Ok(act.last().unwrap().column(0).iter().map(|&o| logistic(o)).collect())
    }
}

pub fn mlp_predict(params: &MlpParams, sample: ArrayView1<f64>) -> Result<f64> {
    params.check_width(sample.len())?;
    let x = sample.to_owned().insert_axis(Axis(0));
    Ok(params.predict_batch(&x)?[0])
}

fn sample_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    let w = weights.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; n]);
    if w.len() != n || w.iter().any(|&v| !(v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParameter("sample weights must be non-negative with positive sum".into()));
    }
    Ok(w)
}

/// Weighted mean loss and its gradient in flat parameter order.
pub fn mlp_loss_gradient(
    params: &MlpParams,
    x: &Array2<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    objective: MlpObjective,
) -> Result<(f64, Vec<f64>)> {
    params.check_width(x.ncols())?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("MLP training samples"));
    }
    let w = sample_weights(weights, y.len())?;
    let total: f64 = w.iter().sum();
    let (pre, act) = params.forward(x);
    let logits = act.last().unwrap();

    let mut loss = 0.0;
    let mut delta = Array2::zeros((y.len(), 1));
    for i in 0..y.len() {
        let p = logistic(logits[[i, 0]]);
        let wi = w[i] / total;
        match objective {
            MlpObjective::Bce => {
                let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                loss -= wi * (y[i] * pc.ln() + (1.0 - y[i]) * (1.0 - pc).ln());
                // clamped probabilities make the loss locally constant
                if pc == p {
                    delta[[i, 0]] = wi * (p - y[i]);
                }
            }
            MlpObjective::Mse => {
                loss += wi * (p - y[i]) * (p - y[i]);
                delta[[i, 0]] = wi * 2.0 * (p - y[i]) * p * (1.0 - p);
            }
        }
    }

    let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(params.layers.len());
    for k in (0..params.layers.len()).rev() {
        let gw = delta.t().dot(&act[k]);
        let gb = delta.sum_axis(Axis(0));
        if k > 0 {
            let back = delta.dot(&params.layers[k].weight);
            delta = back * pre[k - 1].mapv(|a| if a > 0.0 { 1.0 } else { 0.0 });
        }
        grads.push((gw, gb));
    }
    grads.reverse();
    let mut flat = Vec::with_capacity(params.n_params());
    for (gw, gb) in grads {
        flat.extend(gw.iter());
        flat.extend(gb.iter());
    }
    Ok((loss, flat))
}

pub fn mlp_loss(
    params: &MlpParams,
    x: &Array2<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    objective: MlpObjective,
) -> Result<f64> {
    Ok(mlp_loss_gradient(params, x, y, weights, objective)?.0)
}

/// Full-batch Adam. Returns the final parameters and the per-epoch loss.
pub fn mlp_train(
    x: &Array2<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    cfg: &MlpConfig,
) -> Result<(MlpParams, Vec<f64>)> {
    if !(cfg.lr > 0.0) || cfg.weight_decay < 0.0 {
        return Err(Error::InvalidParameter("MLP learning rate must be positive".into()));
    }
    if cfg.objective == MlpObjective::Bce && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter("classification labels must be 0 or 1".into()));
    }
    if cfg.objective == MlpObjective::Mse && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter("regression targets must lie in [0, 1]".into()));
    }
    let mut params = MlpParams::init(x.ncols(), &cfg.hidden, cfg.seed)?;
    let mut flat = params.flatten();
    let mut opt = Adam::new(flat.len(), AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    });
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (loss, grad) = mlp_loss_gradient(&params, x, y, weights, cfg.objective)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        opt.step(&mut flat, &grad);
        params.set_flat(&flat);
        history.push(loss);
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gat::{compare, numeric_gradient};
    use ndarray::array;
    use rand::Rng;
    use proptest::prelude::*;

    #[test]
    fn zero_weights_give_half() {
        let p = MlpParams::zeros(&[3, 4, 1]);
        assert_eq!(mlp_predict(&p, array![1.0, -2.0, 3.0].view()).unwrap(), 0.5);
        assert!(mlp_predict(&p, array![1.0].view()).is_err());
    }

    #[test]
    fn hand_computed_single_hidden_unit() {
        // h = relu(2·x0 − x1 + 0.5); o = 3h − 1
        let mut p = MlpParams::zeros(&[2, 1, 1]);
        p.layers[0].weight = array![[2.0, -1.0]];
        p.layers[0].bias = array![0.5];
        p.layers[1].weight = array![[3.0]];
        p.layers[1].bias = array![-1.0];
        let x = array![1.0, 0.5];
        let h: f64 = (2.0 * 1.0 - 0.5 + 0.5f64).max(0.0);
        let expect = 1.0 / (1.0 + (-(3.0 * h - 1.0)).exp());
        assert!((mlp_predict(&p, x.view()).unwrap() - expect).abs() < 1e-15);
        assert!((mlp_predict(&p, array![-5.0, 0.0].view()).unwrap() - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn zero_epochs_returns_initial() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let cfg = MlpConfig {
            epochs: 0,
            seed: 3,
            ..Default::default()
        };
        let (p, h) = mlp_train(&x, &[0.0, 1.0], None, &cfg).unwrap();
        assert!(h.is_empty());
        assert_eq!(p, MlpParams::init(2, &cfg.hidden, 3).unwrap());
    }

    #[test]
    fn xor_is_learned() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0.0, 1.0, 1.0, 0.0];
        let mut solved = 0;
        for seed in 0..10 {
            let cfg = MlpConfig {
                hidden: vec![8],
                epochs: 2000,
                seed,
                ..Default::default()
            };
            let (p, _) = mlp_train(&x, &y, None, &cfg).unwrap();
            let preds = p.predict_batch(&x).unwrap();
            if preds.iter().zip(&y).all(|(&q, &t)| (q > 0.5) == (t == 1.0)) {
                solved += 1;
            }
        }
        assert!(solved >= 8, "solved {solved}/10");
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let x = array![[0.0, 0.1], [0.2, 0.0], [1.0, 0.9], [0.8, 1.0]];
        let (_, h) = mlp_train(&x, &[0.0, 0.0, 1.0, 1.0], None, &MlpConfig::default()).unwrap();
        assert!(h.windows(2).take(10).all(|w| w[1] < w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gradients_match_finite_differences(seed in any::<u64>(), mse in any::<bool>()) {
            let mut rng = seed::rng(seed);
            let x = Array2::from_shape_simple_fn((6, 4), || rng.random_range(-1.0..1.0));
            let y: Vec<f64> = (0..6).map(|i| if mse { rng.random_range(0.0..1.0) } else { (i % 2) as f64 }).collect();
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(0.5..2.0)).collect();
            let obj = if mse { MlpObjective::Mse } else { MlpObjective::Bce };
            // random biases keep pre-activations off the ReLU kink at exactly 0
            let mut p = MlpParams::init(4, &[5, 3], seed).unwrap();
            let flat: Vec<f64> = (0..p.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            p.set_flat(&flat);
            let (_, analytic) = mlp_loss_gradient(&p, &x, &y, Some(&w), obj).unwrap();
            let numeric = numeric_gradient(&p.flatten(), 1e-5, |flat| {
                let mut q = p.clone();
                q.set_flat(flat);
                mlp_loss(&q, &x, &y, Some(&w), obj)
            }).unwrap();
            let report = compare(&analytic, &numeric, 1e-4, |k| p.param_name(k));
            prop_assert!(report.passed, "{:?}", report);
        }

        #[test]
        fn outputs_finite(seed in any::<u64>(), v in prop::collection::vec(-1e3f64..1e3, 3)) {
            let p = MlpParams::init(3, &[8, 4], seed).unwrap();
            let q = mlp_predict(&p, Array1::from(v).view()).unwrap();
            prop_assert!(q.is_finite() && (0.0..=1.0).contains(&q));
        }
    }
}
