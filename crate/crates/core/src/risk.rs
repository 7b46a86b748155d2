//! Downstream risk regression: score targets, node split, GAT/DT/MLP
//! regressors and the original-vs-disambiguated edge-list comparison.

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baselines::{dt_predict, dt_train, mlp_train, Criterion, MlpConfig, MlpObjective, TreeConfig};
use crate::data::{build_graph, Cell, ConfidenceFilter, EdgeTable, FeatureMatrix, Graph, NodeTable};
use crate::error::{Error, Result};
use crate::gat::{logistic, Architecture, GatModel, TrainConfig};
use crate::metrics::{auc, mae};
use crate::optim::Adam;
use crate::seed;

pub const RISK_CUTOFF: f64 = 7.0;

/// Logistic squashing of the raw score, with its recorded constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub midpoint: f64,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            midpoint: 10.5,
            scale: 3.0,
        }
    }
}

impl Normalization {
    pub fn forward(&self, raw: f64) -> f64 {
        logistic((raw - self.midpoint) / self.scale)
    }

    pub fn inverse(&self, normalized: f64) -> f64 {
        let p = normalized.clamp(1e-12, 1.0 - 1e-12);
        self.midpoint + self.scale * (p / (1.0 - p)).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTarget {
    pub raw: f64,
    pub normalized: f64,
    pub at_risk: bool,
}

pub fn compute_suicide_score(indicators: &[f64], norm: &Normalization) -> Result<RiskTarget> {
    if indicators.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: indicators.len(),
        });
    }
    if indicators.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("indicator responses must be finite".into()));
    }
    let raw: f64 = indicators.iter().sum();
    Ok(RiskTarget {
        raw,
        normalized: norm.forward(raw),
        at_risk: raw >= RISK_CUTOFF,
    })
}

/// Per-node targets from the indicator columns; nodes with a missing response get `None`.
pub fn risk_targets(nodes: &NodeTable, columns: &[&str], norm: &Normalization) -> Result<Vec<Option<RiskTarget>>> {
    let cols = columns
        .iter()
        .map(|&c| nodes.column(c).ok_or_else(|| Error::MissingColumn(c.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let mut vals = Vec::with_capacity(cols.len());
        for c in &cols {
            match &c.cells[i] {
                Cell::Number(x) => vals.push(*x),
                Cell::Missing => break,
                other => {
                    return Err(Error::KindMismatch {
                        column: c.name.clone(),
                        value: other.render(),
                        kind: "numeric".into(),
                    })
                }
            }
        }
        if vals.len() < cols.len() {
            log::info!("node {} excluded from risk targets: missing indicator", nodes.pids[i]);
            out.push(None);
        } else {
            out.push(Some(compute_suicide_score(&vals, norm)?));
        }
    }
    Ok(out)
}

/// Loss weights: at-risk nodes get #not / #at-risk, everyone else 1.
pub fn oversample_weights(at_risk: &[bool]) -> Result<Vec<f64>> {
    let pos = at_risk.iter().filter(|&&r| r).count();
    if pos == 0 {
        return Err(Error::InvalidParameter("no at-risk nodes among training targets".into()));
    }
    let neg = at_risk.len() - pos;
    if neg == 0 {
        return Err(Error::InvalidParameter("no not-at-risk nodes among training targets".into()));
    }
    let w = neg as f64 / pos as f64;
    Ok(at_risk.iter().map(|&r| if r { w } else { 1.0 }).collect())
}

/// Fails if any predictor column derives from a target column.
pub fn leakage_guard(features: &FeatureMatrix, targets: &[&str]) -> Result<()> {
    match features.columns.iter().find(|c| targets.contains(&c.source.as_str())) {
        Some(c) => Err(Error::Leakage(c.source.clone())),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_nodes(eligible: &[usize], ratios: (f64, f64, f64), seed: u64) -> Result<NodeSplit> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("split ratios must be non-negative and sum to 1, got {ratios:?}")));
    }
    let mut ids = eligible.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.shuffle(&mut seed::stage_rng(seed, "node-split"));
    let n = ids.len();
    let n_train = (a * n as f64).round() as usize;
    let n_val = ((b * n as f64).round() as usize).min(n - n_train);
    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(NodeSplit {
        train: ids,
        validation,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskModelKind {
    Gat,
    Dt,
    Mlp,
}

impl RiskModelKind {
    pub const ALL: [RiskModelKind; 3] = [RiskModelKind::Gat, RiskModelKind::Dt, RiskModelKind::Mlp];

    pub fn as_str(&self) -> &'static str {
        match self {
            RiskModelKind::Gat => "gat",
            RiskModelKind::Dt => "dt",
            RiskModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    pub split: (f64, f64, f64),
    pub normalization: Normalization,
    /// Output width is forced to one channel.
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub tree: TreeConfig,
    pub mlp: MlpConfig,
    /// Attainable raw score range; predictions are clipped into it.
    pub score_range: (f64, f64),
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            split: (0.6, 0.2, 0.2),
            normalization: Normalization::default(),
            architecture: Architecture::default(),
            train: TrainConfig {
                lr: 0.001,
                ..TrainConfig::default()
            },
            tree: TreeConfig {
                max_depth: 5,
                min_leaf: 5,
                ..TreeConfig::default()
            },
            mlp: MlpConfig {
                objective: MlpObjective::Mse,
                weight_decay: 1e-3,
                ..MlpConfig::default()
            },
            score_range: (3.0, 18.0),
        }
    }
}

/// Weighted squared error of logistic(output) against normalized targets,
/// over `nodes`, and its parameter gradient.
pub fn risk_loss_gradient(
    model: &GatModel,
    features: &Array2<f64>,
    graph: &Graph,
    nodes: &[usize],
    targets: &[f64],
    weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if model.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: model.out_dim(),
        });
    }
    if nodes.len() != targets.len() || nodes.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: nodes.len(),
            got: targets.len().min(weights.len()),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Empty("risk training nodes"));
    }
    let state = model.forward_weighted(features, graph, None)?;
    let out = state.output();
    let mut d_out = Array2::zeros(out.raw_dim());
    let mut loss = 0.0;
    for ((&i, &y), &w) in nodes.iter().zip(targets).zip(weights) {
        let p = logistic(out[[i, 0]]);
        let wi = w / total;
        loss += wi * (p - y) * (p - y);
        d_out[[i, 0]] += wi * 2.0 * (p - y) * p * (1.0 - p);
    }
    let grads = model.backward(&state, graph, &d_out, None, None).0.flatten();
    Ok((loss, grads))
}

/// Risk loss at flat parameters `flat`, for finite-difference checks.
pub fn risk_loss_at(
    model: &GatModel,
    flat: &[f64],
    features: &Array2<f64>,
    graph: &Graph,
    nodes: &[usize],
    targets: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let mut m = model.clone();
    m.set_flat(flat);
    Ok(risk_loss_gradient(&m, features, graph, nodes, targets, weights)?.0)
}

/// Full-batch training with early stopping on unweighted validation error.
/// Returns normalized-scale predictions for every node.
pub fn train_gat_regressor(
    features: &Array2<f64>,
    graph: &Graph,
    targets: &[Option<RiskTarget>],
    split: &NodeSplit,
    weights: &[f64],
    cfg: &RiskConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.train.validate()?;
    let arch = Architecture {
        out_channels: 1,
        ..cfg.architecture.clone()
    };
    let mut model = GatModel::init(features.ncols(), &arch, seed::derive_seed(seed, "risk-gat-init"))?;
    let y = |ids: &[usize]| -> Result<Vec<f64>> { ids.iter().map(|&i| target_of(targets, i).map(|t| t.normalized)).collect() };
    let y_train = y(&split.train)?;
    let y_val = y(&split.validation)?;
    let ones = vec![1.0; y_val.len()];
    let mut flat = model.flatten();
    let mut opt = Adam::new(flat.len(), cfg.train.adam());
    let mut best = (f64::INFINITY, model.clone());
    let mut since = 0;
    for epoch in 1..=cfg.train.epochs {
        let (loss, grad) = risk_loss_gradient(&model, features, graph, &split.train, &y_train, weights)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        opt.step(&mut flat, &grad);
        model.set_flat(&flat);
        let val = if split.validation.is_empty() {
            loss
        } else {
            risk_loss_gradient(&model, features, graph, &split.validation, &y_val, &ones)?.0
        };
        if val < best.0 {
            best = (val, model.clone());
            since = 0;
        } else {
            since += 1;
            if since >= cfg.train.patience {
                break;
            }
        }
    }
    let out = best.1.embed(features, graph)?;
    Ok(out.0.column(0).iter().map(|&v| logistic(v)).collect())
}

fn target_of(targets: &[Option<RiskTarget>], i: usize) -> Result<RiskTarget> {
    targets
        .get(i)
        .copied()
        .flatten()
        .ok_or_else(|| Error::InvalidParameter(format!("node {i} has no risk target")))
}

/// Node features extended with the neighbor mean over `graph` and the degree,
/// so the non-graph regressors see the chosen edge list.
pub fn graph_augmented_features(features: &Array2<f64>, graph: &Graph) -> Array2<f64> {
    let (n, f) = features.dim();
    let mut out = Array2::zeros((n, 2 * f + 1));
    out.slice_mut(ndarray::s![.., ..f]).assign(features);
    for i in 0..n {
        let nb: Vec<usize> = graph.neighbors(i).iter().copied().filter(|&j| j != i).collect();
        if !nb.is_empty() {
            let mean = features.select(Axis(0), &nb).mean_axis(Axis(0)).expect("non-empty");
            out.slice_mut(ndarray::s![i, f..2 * f]).assign(&mean);
        }
        out[[i, 2 * f]] = nb.len() as f64;
    }
    out
}

pub fn train_risk_model(
    kind: RiskModelKind,
    features: &Array2<f64>,
    graph: &Graph,
    targets: &[Option<RiskTarget>],
    split: &NodeSplit,
    cfg: &RiskConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let at_risk: Vec<bool> = split.train.iter().map(|&i| target_of(targets, i).map(|t| t.at_risk)).collect::<Result<_>>()?;
    let weights = oversample_weights(&at_risk)?;
    match kind {
        RiskModelKind::Gat => train_gat_regressor(features, graph, targets, split, &weights, cfg, seed),
        RiskModelKind::Dt | RiskModelKind::Mlp => {
            let x = graph_augmented_features(features, graph);
            let x_train = x.select(Axis(0), &split.train);
            let y_train: Vec<f64> = split.train.iter().map(|&i| target_of(targets, i).map(|t| t.normalized)).collect::<Result<_>>()?;
            if kind == RiskModelKind::Dt {
                let tree = dt_train(&x_train, &y_train, Some(&weights), Criterion::Variance, &cfg.tree)?;
                x.rows().into_iter().map(|r| dt_predict(&tree, r, x.ncols())).collect()
            } else {
                let mlp_cfg = MlpConfig {
                    objective: MlpObjective::Mse,
                    seed: seed::derive_seed(seed, "risk-mlp"),
                    ..cfg.mlp.clone()
                };
                let (params, _) = mlp_train(&x_train, &y_train, Some(&weights), &mlp_cfg)?;
                params.predict_batch(&x)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskScores {
    pub mae: f64,
    /// `None` when the evaluated labels hold a single class.
    pub auc: Option<f64>,
}

/// MAE on the raw scale and AUC against the at-risk labels.
pub fn evaluate_risk(preds_raw: &[f64], targets_raw: &[f64], cutoff: f64) -> Result<RiskScores> {
    let labels: Vec<bool> = targets_raw.iter().map(|&t| t >= cutoff).collect();
    let auc = match auc(preds_raw, &labels) {
        Ok(a) => Some(a),
        Err(Error::AucUndefined) => None,
        Err(e) => return Err(e),
    };
    Ok(RiskScores {
        mae: mae(preds_raw, targets_raw)?,
        auc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: RiskModelKind,
    pub edge_list: String,
    pub seed: u64,
    pub test: RiskScores,
    pub in_sample: RiskScores,
}

/// Raw-scale predictions: inverse normalization, clipped to `range`.
pub fn to_raw_scale(preds: &[f64], norm: &Normalization, range: (f64, f64)) -> Vec<f64> {
    preds.iter().map(|&p| norm.inverse(p).clamp(range.0, range.1)).collect()
}

fn scores_on(ids: &[usize], preds_raw: &[f64], targets: &[Option<RiskTarget>]) -> Result<RiskScores> {
    let p: Vec<f64> = ids.iter().map(|&i| preds_raw[i]).collect();
    let t: Vec<f64> = ids.iter().map(|&i| target_of(targets, i).map(|t| t.raw)).collect::<Result<_>>()?;
    evaluate_risk(&p, &t, RISK_CUTOFF)
}

/// One row per (model, edge list), all sharing the same node split and seeds.
pub fn ablation_compare(
    features: &FeatureMatrix,
    target_columns: &[&str],
    targets: &[Option<RiskTarget>],
    edge_lists: &[(&str, &EdgeTable)],
    kinds: &[RiskModelKind],
    cfg: &RiskConfig,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    leakage_guard(features, target_columns)?;
    let n = features.n_nodes();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    let eligible: Vec<usize> = (0..n).filter(|&i| targets[i].is_some()).collect();
    let split = split_nodes(&eligible, cfg.split, seed)?;
    let mut rows = Vec::new();
    for &(name, edges) in edge_lists {
        let graph = build_graph(edges, n, ConfidenceFilter::All);
        for &kind in kinds {
            let preds = train_risk_model(kind, &features.values, &graph, targets, &split, cfg, seed)?;
            let preds = to_raw_scale(&preds, &cfg.normalization, cfg.score_range);
            rows.push(AblationRow {
                model: kind,
                edge_list: name.to_string(),
                seed,
                test: scores_on(&split.test, &preds, targets)?,
                in_sample: scores_on(&split.train, &preds, targets)?,
            });
        }
    }
    Ok(rows)
}

/// Distinct undirected pairs present in `a` but not `b`.
pub fn edge_difference(a: &EdgeTable, b: &EdgeTable) -> usize {
    let bs: HashSet<_> = b.pair_set(ConfidenceFilter::All);
    a.pairs(ConfidenceFilter::All).iter().filter(|p| !bs.contains(p)).count()
}
