//! Link-prediction training: per-epoch negative sampling, Adam, early
//! stopping on validation loss.

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::loss::link_loss_grad;
use super::model::GatModel;
use crate::data::{pair, sample_non_edges, EdgeSplit, Graph};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Negatives drawn per positive each epoch.
    pub negative_ratio: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 200,
            patience: 20,
            negative_ratio: 1.0,
            weight_decay: 5e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lr, self.beta1, self.beta2, self.eps, self.negative_ratio];
        if positive.iter().any(|&v| !(v > 0.0)) || self.weight_decay < 0.0 || self.patience == 0 {
            return Err(Error::InvalidParameter(format!("invalid training config {self:?}")));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidParameter("Adam betas must be < 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// Delimited loss curve: `epoch,train_loss,val_loss`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }
}

/// Positive and negative pairs with labels.
fn labeled(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let mut pairs = pos.to_vec();
    pairs.extend_from_slice(neg);
    let mut labels = vec![1.0; pos.len()];
    labels.resize(pairs.len(), 0.0);
    (pairs, labels)
}

/// Train `init` on `split.train` positives. `graph` is the message-passing
/// graph and must not contain validation or test edges. Pairs in `known`
/// (any reported link) are never drawn as negatives.
pub fn train(
    init: GatModel,
    features: &Array2<f64>,
    graph: &Graph,
    split: &EdgeSplit,
    known: &HashSet<(usize, usize)>,
    cfg: &TrainConfig,
) -> Result<(GatModel, TrainHistory)> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok((init, TrainHistory::default()));
    }
    if split.train.is_empty() {
        return Err(Error::Empty("training edges"));
    }
    let n = graph.n();
    let mut forbidden: HashSet<(usize, usize)> = known.iter().map(|&(a, b)| pair(a, b)).collect();
    forbidden.extend(split.train.iter().chain(&split.validation).chain(&split.test).map(|&(a, b)| pair(a, b)));
    forbidden.extend(graph.undirected_edges());

    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "train-negatives"));
    let mut val_rng = seed::rng(seed::derive_seed(cfg.seed, "validation-negatives"));
    let n_val_neg = (split.validation.len() as f64 * cfg.negative_ratio).round() as usize;
    let val_neg = sample_non_edges(n, n_val_neg, &forbidden, &mut val_rng)?;
    let (val_pairs, val_labels) = labeled(&split.validation, &val_neg);

    let val_loss_of = |m: &GatModel| -> Result<f64> {
        if val_pairs.is_empty() {
            return Ok(f64::NAN);
        }
        let z = m.embed(features, graph)?;
        Ok(link_loss_grad(&z.0, &val_pairs, &val_labels)?.0)
    };

    let mut model = init;
    let mut params = model.flatten();
    let mut opt = Adam::new(params.len(), cfg.adam());
    let mut history = TrainHistory {
        best_val_loss: val_loss_of(&model)?,
        ..Default::default()
    };
    let mut best = model.clone();
    let mut since_best = 0;
    let n_neg = ((split.train.len() as f64) * cfg.negative_ratio).round().max(1.0) as usize;

    for epoch in 1..=cfg.epochs {
        let neg = sample_non_edges(n, n_neg, &forbidden, &mut rng)?;
        let (pairs, labels) = labeled(&split.train, &neg);
        let state = model.forward_weighted(features, graph, None)?;
        let (loss, dz) = link_loss_grad(state.output(), &pairs, &labels)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let (grads, _) = model.backward(&state, graph, &dz, None, None);
        opt.step(&mut params, &grads.flatten());
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        model.set_flat(&params);

        let val_loss = val_loss_of(&model)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_loss,
        });
        // without validation edges every epoch counts as an improvement
        if val_loss.is_nan() || val_loss < history.best_val_loss || history.best_val_loss.is_nan() {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}
