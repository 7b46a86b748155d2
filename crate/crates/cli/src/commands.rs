use std::collections::HashMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use alterlink::data::{load_edges, load_nodes, preprocess_excluding, write_edges, EdgeTable, FeatureMatrix, NodeTable, Schema};
use alterlink::disambig::{
    cases_for_uncertain, load_cases, resolve_edge_list, write_resolution_log, AmbiguityCase, CaseKind,
};
use alterlink::explain::{explain_link, explanation_report, attribute_ranking, ExplanationRecord};
use alterlink::gat::Checkpoint;
use alterlink::risk::{ablation_compare, risk_targets, RiskModelKind};
use alterlink::simulate::{fit_model, run_benchmark};
use alterlink::synth::{generate, write_dataset, DatasetFiles, EXTRA_PREFIX, INDICATOR_COLUMNS};
use alterlink_review::{Session, SessionInputs};

use crate::config::{DatasetConfig, Paths, Preprocess, RunConfig};
use crate::CliError;

/// Files a command wrote plus a human-readable summary.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

type Rows = Vec<Vec<String>>;

fn write_csv(path: &Path, header: &[&str], rows: &Rows) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| alterlink::Error::csv(path, e))?;
    w.write_record(header).map_err(|e| alterlink::Error::csv(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| alterlink::Error::csv(path, e))?;
    }
    w.flush().map_err(|e| alterlink::Error::io(path, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| alterlink::Error::io(path, e).into())
}

fn key_values(pairs: &[(&str, String)]) -> Rows {
    pairs.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| alterlink::Error::io(&dir, e))?;
    Ok(dir)
}

fn require(path: PathBuf, what: &str, hint: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput(format!("{what} {} not found{hint}", path.display())))
    }
}

pub fn load_table(cfg: &RunConfig) -> Result<(NodeTable, EdgeTable), CliError> {
    let p = &cfg.paths;
    let schema = Schema::load(&require(cfg.resolve_path(&p.schema), "schema file", "")?)?;
    let nodes = load_nodes(&require(cfg.resolve_path(&p.nodes), "node table", "")?, Some(&schema))?;
    let edges = load_edges(&require(cfg.resolve_path(&p.edges), "edge list", "")?, &nodes)?;
    Ok((nodes, edges))
}

/// Disambiguation features: every column not matched by `preprocess.exclude`.
pub fn disambiguation_features(cfg: &RunConfig, nodes: &NodeTable) -> Result<FeatureMatrix, CliError> {
    let excluded: Vec<&str> = nodes
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .filter(|n| cfg.preprocess.matches(n))
        .collect();
    Ok(preprocess_excluding(nodes, cfg.preprocess.missing_threshold, &excluded)?)
}

fn load_checkpoint(cfg: &RunConfig, features: &FeatureMatrix) -> Result<Checkpoint, CliError> {
    let path = require(cfg.checkpoint_path(), "checkpoint", "; run `alterlink train` first")?;
    let ck = Checkpoint::load(&path)?;
    ck.ensure_compatible(features)?;
    Ok(ck)
}

/// Cases from `paths.cases` plus an existence case for every uncovered uncertain edge.
pub fn load_case_set(cfg: &RunConfig, nodes: &NodeTable, edges: &EdgeTable) -> Result<Vec<AmbiguityCase>, CliError> {
    let listed = match &cfg.paths.cases {
        Some(p) => load_cases(&require(cfg.resolve_path(p), "case file", "")?, nodes)?,
        None => Vec::new(),
    };
    Ok(cases_for_uncertain(edges, &listed)?)
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Output, CliError> {
    let synth = alterlink::synth::SynthConfig {
        seed: cfg.seed,
        ..cfg.synth.clone()
    };
    synth.validate().map_err(|e| CliError::Config(format!("synth: {e}")))?;
    let data = generate(&synth)?;
    let dir = out_dir(cfg)?;
    write_dataset(&dir, &data)?;
    let mut exclude = vec![format!("{EXTRA_PREFIX}*")];
    exclude.extend(INDICATOR_COLUMNS.iter().map(|s| s.to_string()));
    let dataset_cfg = DatasetConfig {
        seed: cfg.seed,
        paths: Paths {
            cases: Some(DatasetFiles::CASES.into()),
            truth: Some(DatasetFiles::TRUTH.into()),
            original_edges: Some(DatasetFiles::EDGES_ORIGINAL.into()),
            ..Paths::default()
        },
        preprocess: Preprocess {
            exclude,
            ..Preprocess::default()
        },
    };
    let text = toml::to_string(&dataset_cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let cfg_path = dir.join("config.toml");
    write_text(&cfg_path, &text)?;
    let files: Vec<PathBuf> = [
        DatasetFiles::NODES,
        DatasetFiles::SCHEMA,
        DatasetFiles::EDGES,
        DatasetFiles::EDGES_ORIGINAL,
        DatasetFiles::EDGES_TRUE,
        DatasetFiles::CASES,
        DatasetFiles::TRUTH,
    ]
    .iter()
    .map(|f| dir.join(f))
    .chain([cfg_path])
    .collect();
    Ok(Output {
        summary: format!(
            "synthesized {} nodes, {} edge rows ({} true links), {} planted cases into {}",
            data.nodes.len(),
            data.edges.len(),
            data.true_edges.len(),
            data.cases.len(),
            dir.display()
        ),
        files,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Output, CliError> {
    let (nodes, edges) = load_table(cfg)?;
    let features = disambiguation_features(cfg, &nodes)?;
    let fitted = fit_model(&features.values, &edges, &cfg.resolve_config(), cfg.seed)?;
    let ck = Checkpoint::new(fitted.model.clone(), &features, Some(fitted.threshold.tau)).with_graph(&fitted.graph);
    let dir = out_dir(cfg)?;
    let ck_path = cfg.checkpoint_path();
    if let Some(parent) = ck_path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| alterlink::Error::io(parent, e))?;
    }
    ck.save(&ck_path)?;
    let history = dir.join("train_history.csv");
    write_text(&history, &fitted.history.to_csv())?;
    let h = &fitted.history;
    let summary_path = dir.join("train_summary.csv");
    write_csv(
        &summary_path,
        &["key", "value"],
        &key_values(&[
            ("seed", cfg.seed.to_string()),
            ("n_nodes", nodes.len().to_string()),
            ("n_features", features.width().to_string()),
            ("n_train", fitted.split.train.len().to_string()),
            ("n_validation", fitted.split.validation.len().to_string()),
            ("epochs_run", h.epochs.len().to_string()),
            ("best_epoch", h.best_epoch.to_string()),
            ("best_val_loss", h.best_val_loss.to_string()),
            ("stopped_early", h.stopped_early.to_string()),
            ("tau", fitted.threshold.tau.to_string()),
            ("validation_f1", fitted.threshold.f1.to_string()),
            ("param_hash", ck.model.param_hash()),
        ]),
    )?;
    Ok(Output {
        summary: format!(
            "trained on {} links ({} held out): best epoch {} of {}, val loss {:.4}, tau {:.4} (F1 {:.3})",
            fitted.split.train.len(),
            fitted.split.validation.len(),
            h.best_epoch,
            h.epochs.len(),
            h.best_val_loss,
            fitted.threshold.tau,
            fitted.threshold.f1
        ),
        files: vec![ck_path, history, summary_path],
    })
}

pub fn cmd_resolve(cfg: &RunConfig) -> Result<Output, CliError> {
    let (nodes, edges) = load_table(cfg)?;
    let features = disambiguation_features(cfg, &nodes)?;
    let ck = load_checkpoint(cfg, &features)?;
    let tau = ck
        .threshold
        .ok_or_else(|| CliError::Core(alterlink::Error::Checkpoint("no calibrated threshold".into())))?;
    let graph = ck.graph(nodes.len())?;
    let z = ck.model.embed(&features.values, &graph)?;
    let cases = load_case_set(cfg, &nodes, &edges)?;
    let d = &cfg.disambiguation;
    let (resolved, log) = resolve_edge_list(&edges, &cases, &z, Some(tau), d.metric, d.margin_epsilon)?;

    let dir = out_dir(cfg)?;
    let log_path = dir.join("resolutions.jsonl");
    write_resolution_log(&log_path, &log, &nodes)?;
    let edges_path = cfg.resolved_edges_path();
    write_edges(&edges_path, &resolved, &nodes)?;

    let truth: HashMap<String, alterlink::disambig::Truth> = match &cfg.paths.truth {
        Some(p) => load_cases(&require(cfg.resolve_path(p), "truth file", "")?, &nodes)?
            .into_iter()
            .filter_map(|c| c.truth.map(|t| (c.id, t)))
            .collect(),
        None => HashMap::new(),
    };
    let acc = |kind: Option<CaseKind>| -> Option<f64> {
        let hits: Vec<f64> = log
            .iter()
            .filter(|r| kind.is_none_or(|k| r.kind == k))
            .filter_map(|r| truth.get(&r.case_id).map(|&t| r.correct(t) as u8 as f64))
            .collect();
        mean(&hits)
    };
    let n_kind = |k: CaseKind| log.iter().filter(|r| r.kind == k).count();
    let added = resolved.len() - edges.count(alterlink::data::Confidence::Confident);
    let low = log.iter().filter(|r| r.low_confidence).count();
    let summary_path = dir.join("resolve_summary.csv");
    write_csv(
        &summary_path,
        &["key", "value"],
        &key_values(&[
            ("n_cases", log.len().to_string()),
            ("n_pair", n_kind(CaseKind::Pair).to_string()),
            ("n_existence", n_kind(CaseKind::Existence).to_string()),
            ("links_added", added.to_string()),
            ("low_confidence", low.to_string()),
            ("tau", tau.to_string()),
            ("n_with_truth", log.iter().filter(|r| truth.contains_key(&r.case_id)).count().to_string()),
            ("accuracy", opt(acc(None))),
            ("pair_accuracy", opt(acc(Some(CaseKind::Pair)))),
            ("existence_accuracy", opt(acc(Some(CaseKind::Existence)))),
        ]),
    )?;
    let mut summary = format!(
        "resolved {} cases ({} pair, {} existence): {} links added, {} low-confidence",
        log.len(),
        n_kind(CaseKind::Pair),
        n_kind(CaseKind::Existence),
        added,
        low
    );
    if let Some(a) = acc(None) {
        let _ = write!(summary, "; accuracy {a:.3} against ground truth");
    }
    Ok(Output {
        summary,
        files: vec![log_path, edges_path, summary_path],
    })
}

const TASKS: [&str; 2] = ["pair", "existence"];

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let (nodes, edges) = load_table(cfg)?;
    let features = disambiguation_features(cfg, &nodes)?;
    let mut rows = Rows::new();
    // (model, task) -> per-seed accuracy and F1
    let mut acc: Vec<((String, &str), Vec<f64>, Vec<f64>)> = Vec::new();
    let mut best: HashMap<(String, &str), usize> = HashMap::new();
    let seeds = cfg.seeds();
    for &s in &seeds {
        let report = run_benchmark(&features.values, &edges, &cfg.benchmark, s)?;
        log::info!("benchmark seed {s} done");
        for task in TASKS {
            let score = |m: &alterlink::simulate::ModelScores| if task == "pair" { m.pair.clone() } else { m.existence.clone() };
            for m in &report.models {
                let t = score(m);
                rows.push(vec![
                    s.to_string(),
                    m.model.clone(),
                    task.to_string(),
                    t.accuracy.to_string(),
                    t.metrics.precision.to_string(),
                    t.metrics.recall.to_string(),
                    t.metrics.f1.to_string(),
                ]);
                let key = (m.model.clone(), task);
                match acc.iter_mut().find(|(k, _, _)| *k == key) {
                    Some((_, a, f)) => {
                        a.push(t.accuracy);
                        f.push(t.metrics.f1);
                    }
                    None => acc.push((key, vec![t.accuracy], vec![t.metrics.f1])),
                }
                let others_below = report
                    .models
                    .iter()
                    .filter(|o| o.model != m.model)
                    .all(|o| score(o).accuracy < t.accuracy);
                if others_below {
                    *best.entry((m.model.clone(), task)).or_default() += 1;
                }
            }
        }
    }
    let dir = out_dir(cfg)?;
    let bench = dir.join("benchmark.csv");
    write_csv(&bench, &["seed", "model", "task", "accuracy", "precision", "recall", "f1"], &rows)?;
    let mut summary_rows = Rows::new();
    let mut summary = String::from("model task       mean_acc  seeds_best\n");
    for ((model, task), a, f) in &acc {
        let min = a.iter().copied().fold(f64::INFINITY, f64::min);
        let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let wins = best.get(&(model.clone(), *task)).copied().unwrap_or(0);
        summary_rows.push(vec![
            model.clone(),
            task.to_string(),
            opt(mean(a)),
            min.to_string(),
            max.to_string(),
            opt(mean(f)),
            wins.to_string(),
            a.len().to_string(),
        ]);
        let _ = writeln!(summary, "{model:5} {task:10} {:.3}     {wins}/{}", mean(a).unwrap_or(f64::NAN), a.len());
    }
    let sum_path = dir.join("benchmark_summary.csv");
    write_csv(
        &sum_path,
        &["model", "task", "mean_accuracy", "min_accuracy", "max_accuracy", "mean_f1", "seeds_best", "n_seeds"],
        &summary_rows,
    )?;
    Ok(Output {
        summary: summary.trim_end().to_string(),
        files: vec![bench, sum_path],
    })
}

pub fn cmd_risk(cfg: &RunConfig) -> Result<Output, CliError> {
    let (nodes, edges) = load_table(cfg)?;
    let resolved_path = require(cfg.resolved_edges_path(), "resolved edge list", "; run `alterlink resolve` first")?;
    let resolved = load_edges(&resolved_path, &nodes)?;
    let original = match &cfg.paths.original_edges {
        Some(p) => load_edges(&require(cfg.resolve_path(p), "original edge list", "")?, &nodes)?,
        None => edges,
    };
    let indicators: Vec<&str> = cfg.experiments.risk_indicators.iter().map(String::as_str).collect();
    let features = preprocess_excluding(&nodes, cfg.preprocess.missing_threshold, &indicators)?;
    let targets = risk_targets(&nodes, &indicators, &cfg.risk.normalization)?;
    let lists = [("original", &original), ("resolved", &resolved)];
    let seeds = cfg.seeds();
    let mut rows = Rows::new();
    let mut all = Vec::new();
    for &s in &seeds {
        let r = ablation_compare(&features, &indicators, &targets, &lists, &RiskModelKind::ALL, &cfg.risk, s)?;
        log::info!("risk seed {s} done");
        for row in &r {
            rows.push(vec![
                s.to_string(),
                row.model.as_str().to_string(),
                row.edge_list.clone(),
                row.test.mae.to_string(),
                opt(row.test.auc),
                row.in_sample.mae.to_string(),
                opt(row.in_sample.auc),
            ]);
        }
        all.push(r);
    }
    let dir = out_dir(cfg)?;
    let risk_path = dir.join("risk.csv");
    write_csv(
        &risk_path,
        &["seed", "model", "edge_list", "test_mae", "test_auc", "in_sample_mae", "in_sample_auc"],
        &rows,
    )?;
    let mut summary_rows = Rows::new();
    let mut summary = String::from("model  MAE orig -> resolved   AUC orig -> resolved   seeds both better\n");
    for kind in RiskModelKind::ALL {
        let pick = |r: &[alterlink::risk::AblationRow], list: &str| {
            r.iter().find(|x| x.model == kind && x.edge_list == list).expect("row per model and list").test
        };
        let (mut mae_o, mut mae_r, mut auc_o, mut auc_r) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut mae_lower, mut auc_higher, mut both) = (0, 0, 0);
        for r in &all {
            let (o, n) = (pick(r, "original"), pick(r, "resolved"));
            mae_o.push(o.mae);
            mae_r.push(n.mae);
            let m = n.mae < o.mae;
            let a = match (o.auc, n.auc) {
                (Some(x), Some(y)) => {
                    auc_o.push(x);
                    auc_r.push(y);
                    y > x
                }
                _ => false,
            };
            mae_lower += m as usize;
            auc_higher += a as usize;
            both += (m && a) as usize;
        }
        summary_rows.push(vec![
            kind.as_str().to_string(),
            opt(mean(&mae_o)),
            opt(mean(&mae_r)),
            opt(mean(&auc_o)),
            opt(mean(&auc_r)),
            mae_lower.to_string(),
            auc_higher.to_string(),
            both.to_string(),
            seeds.len().to_string(),
        ]);
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            summary,
            "{:5}  {} -> {}          {} -> {}          {both}/{}",
            kind.as_str(),
            f(mean(&mae_o)),
            f(mean(&mae_r)),
            f(mean(&auc_o)),
            f(mean(&auc_r)),
            seeds.len()
        );
    }
    let sum_path = dir.join("risk_summary.csv");
    write_csv(
        &sum_path,
        &[
            "model",
            "original_mae",
            "resolved_mae",
            "original_auc",
            "resolved_auc",
            "seeds_mae_lower",
            "seeds_auc_higher",
            "seeds_both",
            "n_seeds",
        ],
        &summary_rows,
    )?;
    Ok(Output {
        summary: summary.trim_end().to_string(),
        files: vec![risk_path, sum_path],
    })
}

pub fn cmd_explain(cfg: &RunConfig) -> Result<Output, CliError> {
    let (nodes, edges) = load_table(cfg)?;
    let features = disambiguation_features(cfg, &nodes)?;
    let ck = load_checkpoint(cfg, &features)?;
    let graph = ck.graph(nodes.len())?;
    let mut cases = load_case_set(cfg, &nodes, &edges)?;
    if let Some(k) = cfg.experiments.explain_cases {
        cases.truncate(k);
    }
    let mut explanations = Vec::new();
    let mut records = Vec::new();
    for c in &cases {
        for &v in &c.candidates {
            let e = explain_link(&ck.model, &features, &graph, c.source, v, &cfg.explain)?;
            records.push(ExplanationRecord::new(&c.id, &e, &nodes));
            explanations.push(e);
        }
    }
    let unconverged = records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        log::warn!(
            "{unconverged} of {} mask optimizations had not settled after {} epochs",
            records.len(),
            cfg.explain.epochs
        );
    }
    let dir = out_dir(cfg)?;
    let jsonl = dir.join("explanations.jsonl");
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).map_err(alterlink::Error::from)?);
        text.push('\n');
    }
    write_text(&jsonl, &text)?;
    let report = explanation_report(&explanations)?;
    let report_path = dir.join("explanation_report.csv");
    let rows = report
        .attributes
        .iter()
        .map(|a| vec![a.attribute.clone(), a.count.to_string(), a.frequency.to_string(), a.mean_rank.to_string()])
        .collect();
    write_csv(&report_path, &["attribute", "count", "frequency", "mean_rank"], &rows)?;
    let cases_path = dir.join("explanation_cases.csv");
    let rows = records
        .iter()
        .zip(&explanations)
        .map(|(r, e)| {
            vec![
                r.case_id.clone(),
                r.source.clone(),
                r.candidate.clone(),
                r.score.to_string(),
                r.predicted.to_string(),
                r.fidelity.to_string(),
                r.shared_neighbors.to_string(),
                attribute_ranking(e).join(";"),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cases_path,
        &[
            "case_id",
            "source",
            "candidate",
            "score",
            "predicted",
            "fidelity",
            "shared_neighbors",
            "attributes",
            "converged",
        ],
        &rows,
    )?;
    let mut summary = format!("explained {} links from {} cases; most frequent attributes:", records.len(), cases.len());
    for a in report.attributes.iter().take(5) {
        let _ = write!(summary, "\n  {:20} {:.2}", a.attribute, a.frequency);
    }
    Ok(Output {
        summary,
        files: vec![jsonl, report_path, cases_path],
    })
}

/// Inputs for a review session over the trained checkpoint.
pub fn session_inputs(cfg: &RunConfig) -> Result<SessionInputs, CliError> {
    let (nodes, edges) = load_table(cfg)?;
    let features = disambiguation_features(cfg, &nodes)?;
    let checkpoint = load_checkpoint(cfg, &features)?;
    let cases = load_case_set(cfg, &nodes, &edges)?;
    Ok(SessionInputs {
        nodes,
        features,
        edges,
        cases,
        checkpoint,
        resolve: cfg.resolve_config(),
        explain: cfg.explain.clone(),
        profile_columns: cfg.serve.profile_columns.clone(),
        seed: cfg.seed,
    })
}

pub fn review_state_dir(cfg: &RunConfig) -> PathBuf {
    match &cfg.serve.state_dir {
        Some(p) => cfg.resolve_path(p),
        None => cfg.out_dir().join("review"),
    }
}

pub fn cmd_serve(cfg: &RunConfig) -> Result<Output, CliError> {
    let addr: SocketAddr = cfg
        .serve
        .addr
        .parse()
        .map_err(|e| CliError::Config(format!("serve.addr {:?}: {e}", cfg.serve.addr)))?;
    let state = review_state_dir(cfg);
    let session = Arc::new(Session::open(session_inputs(cfg)?, &state)?);
    let ui = cfg.serve.ui_dir.as_ref().map(|p| cfg.resolve_path(p));
    let rt = tokio::runtime::Runtime::new().map_err(|e| alterlink::Error::io(&state, e))?;
    rt.block_on(alterlink_review::serve(session, addr, ui.as_deref()))
        .map_err(|e| alterlink::Error::io(&state, e))?;
    Ok(Output {
        summary: format!("review service stopped; state kept in {}", state.display()),
        files: Vec::new(),
    })
}
