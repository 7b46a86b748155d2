//! Simulated-ambiguity benchmark: hide confident links, plant pair and
//! existence cases around them, and score GAT, MLP and decision tree.

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    dt_predict, dt_train, make_pair_samples, mlp_train, Criterion, MlpConfig, MlpParams, TreeConfig, TreeNode,
};
use crate::data::{sample_non_edges, split_edges, ConfidenceFilter, EdgeSplit, EdgeTable, Graph};
use crate::disambig::{
    accuracy, calibrate_threshold, link_exists, resolve_pair, simulate_link_cases, simulate_pair_cases, AmbiguityCase,
    Decision, DistanceMetric, Resolution, Threshold, Truth, DEFAULT_MARGIN_EPSILON,
};
use crate::error::Result;
use crate::gat::{self, Architecture, Embeddings, GatModel, TrainConfig, TrainHistory};
use crate::metrics::{classification_metrics, ClassificationMetrics};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub split: (f64, f64, f64),
    /// Pair cases drawn (with replacement) from the test links.
    pub pair_cases: usize,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub tree: TreeConfig,
    pub mlp: MlpConfig,
    pub metric: DistanceMetric,
    pub margin_epsilon: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            split: (0.6, 0.2, 0.2),
            pair_cases: 200,
            architecture: Architecture::default(),
            train: TrainConfig {
                weight_decay: 1e-2,
                patience: 200,
                ..TrainConfig::default()
            },
            tree: TreeConfig::default(),
            mlp: MlpConfig::default(),
            metric: DistanceMetric::Euclidean,
            margin_epsilon: DEFAULT_MARGIN_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub accuracy: f64,
    pub metrics: ClassificationMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    pub pair: TaskScores,
    pub existence: TaskScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_pair_cases: usize,
    pub n_existence_cases: usize,
    pub threshold: Threshold,
    pub models: Vec<ModelScores>,
    pub history: TrainHistory,
}

impl BenchmarkReport {
    pub fn model(&self, name: &str) -> Option<&ModelScores> {
        self.models.iter().find(|m| m.model == name)
    }
}

/// Pair task as binary calls: every case is a positive; picking the true alter is a hit.
fn pair_scores(cases: &[AmbiguityCase], res: &[Resolution]) -> Result<TaskScores> {
    let preds: Vec<bool> = cases.iter().zip(res).map(|(c, r)| r.correct(c.truth.expect("simulated truth"))).collect();
    Ok(TaskScores {
        accuracy: accuracy(cases, res)?,
        metrics: classification_metrics(&preds, &vec![true; preds.len()])?,
    })
}

fn existence_scores(cases: &[AmbiguityCase], predicted: &[bool]) -> Result<TaskScores> {
    let labels: Vec<bool> = cases.iter().map(|c| c.truth == Some(Truth::Exists(true))).collect();
    let metrics = classification_metrics(predicted, &labels)?;
    Ok(TaskScores {
        accuracy: metrics.accuracy,
        metrics,
    })
}

/// A pairwise link scorer used by the baselines.
pub trait PairScorer {
    fn score(&self, features: &Array2<f64>, u: usize, v: usize) -> Result<f64>;
}

impl PairScorer for TreeNode {
    fn score(&self, features: &Array2<f64>, u: usize, v: usize) -> Result<f64> {
        let s = make_pair_samples(&[(u, v)], &[0.0], features)?;
        dt_predict(self, s.x.row(0), s.x.ncols())
    }
}

impl PairScorer for MlpParams {
    fn score(&self, features: &Array2<f64>, u: usize, v: usize) -> Result<f64> {
        let s = make_pair_samples(&[(u, v)], &[0.0], features)?;
        crate::baselines::mlp_predict(self, s.x.row(0))
    }
}

/// Higher-probability candidate wins; exact ties go to the lower index.
pub fn baseline_pair(scorer: &dyn PairScorer, features: &Array2<f64>, case: &AmbiguityCase) -> Result<Resolution> {
    let (u, a, b) = (case.source, case.candidates[0], case.candidates[1]);
    let pa = scorer.score(features, u, a)?;
    let pb = scorer.score(features, u, b)?;
    let chosen = if pa > pb {
        a
    } else if pb > pa {
        b
    } else {
        a.min(b)
    };
    Ok(Resolution {
        case_id: case.id.clone(),
        kind: case.kind,
        source: u,
        candidates: vec![a, b],
        decision: Decision::Chosen(chosen),
        distances: vec![1.0 - pa, 1.0 - pb],
        threshold: None,
        margin: (pa - pb).abs(),
        low_confidence: pa == pb,
    })
}

/// Baseline training pairs: train links and an equal number of non-links,
/// each in both orientations.
pub fn baseline_training_pairs(
    split: &EdgeSplit,
    n: usize,
    known: &HashSet<(usize, usize)>,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<f64>)> {
    let mut rng = seed::stage_rng(seed, "baseline-negatives");
    let neg = sample_non_edges(n, split.train.len(), known, &mut rng)?;
    let mut pairs = Vec::with_capacity(4 * split.train.len());
    let mut labels = Vec::with_capacity(4 * split.train.len());
    for (set, y) in [(&split.train, 1.0), (&neg, 0.0)] {
        for &(a, b) in set {
            pairs.push((a, b));
            labels.push(y);
            pairs.push((b, a));
            labels.push(y);
        }
    }
    Ok((pairs, labels))
}

/// Distance threshold from validation links and an equal number of non-links.
pub fn calibrate_on_validation(
    z: &Embeddings,
    split: &EdgeSplit,
    known: &HashSet<(usize, usize)>,
    metric: DistanceMetric,
    seed: u64,
) -> Result<Threshold> {
    let mut rng = seed::stage_rng(seed, "threshold-negatives");
    let neg = sample_non_edges(z.n(), split.validation.len(), known, &mut rng)?;
    let mut d = Vec::with_capacity(2 * neg.len());
    let mut labels = Vec::with_capacity(2 * neg.len());
    for (set, y) in [(&split.validation, true), (&neg, false)] {
        for &(a, b) in set {
            d.push(metric.distance(z, a, b));
            labels.push(y);
        }
    }
    calibrate_threshold(&d, &labels)
}

/// Train a GAT on the confident links of `split.train` and embed with the training graph.
pub fn train_embeddings(
    features: &Array2<f64>,
    split: &EdgeSplit,
    known: &HashSet<(usize, usize)>,
    arch: &Architecture,
    train_cfg: &TrainConfig,
) -> Result<(GatModel, Graph, Embeddings, TrainHistory)> {
    let n = features.nrows();
    let graph = Graph::from_pairs(n, split.train.iter().copied());
    let init = GatModel::init(features.ncols(), arch, seed::derive_seed(train_cfg.seed, "gat-init"))?;
    let (model, history) = gat::train(init, features, &graph, split, known, train_cfg)?;
    let z = model.embed(features, &graph)?;
    Ok((model, graph, z, history))
}

pub fn run_benchmark(features: &Array2<f64>, edges: &EdgeTable, cfg: &BenchmarkConfig, seed: u64) -> Result<BenchmarkReport> {
    let n = features.nrows();
    let known = edges.pair_set(ConfidenceFilter::All);
    let confident = edges.pairs(ConfidenceFilter::ConfidentOnly);
    let split = split_edges(&confident, cfg.split, seed::derive_seed(seed, "split"))?;
    let train_cfg = TrainConfig {
        seed: seed::derive_seed(seed, "train"),
        ..cfg.train.clone()
    };
    let (_, _, z, history) = train_embeddings(features, &split, &known, &cfg.architecture, &train_cfg)?;

    let mut rng = seed::stage_rng(seed, "cases");
    let pair_cases = simulate_pair_cases(&split.test, n, &known, cfg.pair_cases, &mut rng)?;
    let link_cases = simulate_link_cases(&split.test, n, &known, &mut rng)?;
    let threshold = calibrate_on_validation(&z, &split, &known, cfg.metric, seed)?;

    let mut models = Vec::new();
    let gat_pairs: Vec<Resolution> = pair_cases
        .iter()
        .map(|c| resolve_pair(&c.id, c.source, c.candidates[0], c.candidates[1], &z, cfg.metric, cfg.margin_epsilon))
        .collect::<Result<_>>()?;
    let gat_links: Vec<bool> = link_cases
        .iter()
        .map(|c| {
            link_exists(&c.id, c.source, c.candidates[0], &z, threshold.tau, cfg.metric, cfg.margin_epsilon)
                .map(|r| r.decision == Decision::Exists(true))
        })
        .collect::<Result<_>>()?;
    models.push(ModelScores {
        model: "gat".into(),
        pair: pair_scores(&pair_cases, &gat_pairs)?,
        existence: existence_scores(&link_cases, &gat_links)?,
    });

    let (pairs, labels) = baseline_training_pairs(&split, n, &known, seed)?;
    let samples = make_pair_samples(&pairs, &labels, features)?;
    let mlp_cfg = MlpConfig {
        seed: seed::derive_seed(seed, "mlp"),
        ..cfg.mlp.clone()
    };
    let (mlp, _) = mlp_train(&samples.x, &samples.y, None, &mlp_cfg)?;
    let tree = dt_train(&samples.x, &samples.y, None, Criterion::Gini, &cfg.tree)?;
    let baselines: [(&str, &dyn PairScorer, f64); 2] = [
        ("mlp", &mlp, mlp_cfg.decision_threshold),
        ("dt", &tree, cfg.tree.decision_threshold),
    ];
    for (name, scorer, cut) in baselines {
        let res: Vec<Resolution> = pair_cases
            .iter()
            .map(|c| baseline_pair(scorer, features, c))
            .collect::<Result<_>>()?;
        let links: Vec<bool> = link_cases
            .iter()
            .map(|c| scorer.score(features, c.source, c.candidates[0]).map(|p| p > cut))
            .collect::<Result<_>>()?;
        models.push(ModelScores {
            model: name.into(),
            pair: pair_scores(&pair_cases, &res)?,
            existence: existence_scores(&link_cases, &links)?,
        });
    }

    Ok(BenchmarkReport {
        seed,
        n_train: split.train.len(),
        n_validation: split.validation.len(),
        n_test: split.test.len(),
        n_pair_cases: pair_cases.len(),
        n_existence_cases: link_cases.len(),
        threshold,
        models,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolveConfig {
    /// Share of confident links used for training; the rest calibrates τ
    /// and drives early stopping.
    pub train_fraction: f64,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub metric: DistanceMetric,
    pub margin_epsilon: f64,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        let bench = BenchmarkConfig::default();
        ResolveConfig {
            train_fraction: 0.8,
            architecture: bench.architecture,
            train: bench.train,
            metric: bench.metric,
            margin_epsilon: bench.margin_epsilon,
        }
    }
}

/// GAT trained on confident links with τ calibrated on the held-out ones.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub model: GatModel,
    /// Message-passing graph: the training links only.
    pub graph: Graph,
    pub embeddings: Embeddings,
    pub split: EdgeSplit,
    pub threshold: Threshold,
    pub history: TrainHistory,
}

pub fn fit_model(features: &Array2<f64>, edges: &EdgeTable, cfg: &ResolveConfig, seed: u64) -> Result<FittedModel> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(crate::error::Error::InvalidParameter(format!(
            "train_fraction must be in (0, 1), got {}",
            cfg.train_fraction
        )));
    }
    let known = edges.pair_set(ConfidenceFilter::All);
    let confident = edges.pairs(ConfidenceFilter::ConfidentOnly);
    let split = split_edges(
        &confident,
        (cfg.train_fraction, 1.0 - cfg.train_fraction, 0.0),
        seed::derive_seed(seed, "split"),
    )?;
    let train_cfg = TrainConfig {
        seed: seed::derive_seed(seed, "train"),
        ..cfg.train.clone()
    };
    let (model, graph, embeddings, history) =
        train_embeddings(features, &split, &known, &cfg.architecture, &train_cfg)?;
    let threshold = calibrate_on_validation(&embeddings, &split, &known, cfg.metric, seed)?;
    Ok(FittedModel {
        model,
        graph,
        embeddings,
        split,
        threshold,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct ResolveOutcome {
    pub fitted: FittedModel,
    /// Confident links plus every accepted resolution.
    pub resolved: EdgeTable,
    pub resolutions: Vec<Resolution>,
}

/// Fit on confident links and resolve every case against the training-graph embeddings.
pub fn fit_and_resolve(
    features: &Array2<f64>,
    edges: &EdgeTable,
    cases: &[AmbiguityCase],
    cfg: &ResolveConfig,
    seed: u64,
) -> Result<ResolveOutcome> {
    let fitted = fit_model(features, edges, cfg, seed)?;
    let (resolved, resolutions) = crate::disambig::resolve_edge_list(
        edges,
        cases,
        &fitted.embeddings,
        Some(fitted.threshold.tau),
        cfg.metric,
        cfg.margin_epsilon,
    )?;
    Ok(ResolveOutcome {
        fitted,
        resolved,
        resolutions,
    })
}
