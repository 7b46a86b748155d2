//! Synthetic survey networks with homophily-driven links, planted
//! ambiguities and a network-dependent risk outcome.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{pair, write_edges, write_nodes, Cell, Column, ColumnKind, Confidence, Edge, EdgeTable, NodeTable, Schema};
use crate::disambig::{write_cases, AmbiguityCase, Provenance, Truth};
use crate::error::{Error, Result};
use crate::gat::logistic;
use crate::seed;

/// Prefix of the mental-health attribute block.
pub const EXTRA_PREFIX: &str = "mh_";
/// The four risk indicator columns.
pub const INDICATOR_COLUMNS: [&str; 4] = ["sbq_1", "sbq_2", "sbq_3", "sbq_4"];
/// Inclusive response range of each indicator.
pub const INDICATOR_RANGES: [(i32, i32); 4] = [(1, 4), (1, 5), (1, 3), (0, 6)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AttributeKind {
    Categorical { levels: Vec<String> },
    Numeric { min: f64, max: f64, integer: bool },
    Binary { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
    /// Homophily weight: match bonus for categorical/binary, penalty per
    /// standard deviation of difference for numeric.
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub missing_rate: f64,
}

fn levels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn cat(name: &str, levels: Vec<String>, beta: f64) -> AttributeSpec {
    AttributeSpec {
        name: name.into(),
        kind: AttributeKind::Categorical { levels },
        beta,
        missing_rate: 0.02,
    }
}

fn num(name: &str, min: f64, max: f64, beta: f64) -> AttributeSpec {
    AttributeSpec {
        name: name.into(),
        kind: AttributeKind::Numeric { min, max, integer: true },
        beta,
        missing_rate: 0.02,
    }
}

fn bin(name: &str, p: f64, beta: f64) -> AttributeSpec {
    AttributeSpec {
        name: name.into(),
        kind: AttributeKind::Binary { p },
        beta,
        missing_rate: 0.02,
    }
}

/// Survey attributes of the veteran dataset. Links are driven mostly by
/// shared gender, romantic status and marital status.
pub fn default_attributes() -> Vec<AttributeSpec> {
    let edu = names(&["none", "hs", "some_college", "associate", "bachelor", "graduate"]);
    vec![
        num("Age", 19.0, 60.0, 0.3),
        cat("Race", names(&["white", "black", "hispanic", "asian", "other"]), 0.25),
        cat("ed", edu.clone(), 0.2),
        cat("marital_status", names(&["single", "married", "divorced", "separated"]), 10.0),
        bin("Romantic", 0.5, 10.0),
        cat("Gender", names(&["male", "female"]), 10.0),
        cat("Sexuality", names(&["straight", "gay", "bisexual", "other"]), 0.25),
        num("Siblings", 0.0, 8.0, 0.0),
        num("Household", 1.0, 7.0, 0.15),
        cat("dad_ed", edu.clone(), 0.0),
        cat("mom_ed", edu, 0.0),
        num("military_join", 1985.0, 2022.0, 0.1),
        cat("Rank", levels("E", 9), 0.25),
        cat("MOS", levels("mos", 12), 0.15),
        bin("deploy_ever", 0.6, 0.05),
        num("Deployments", 0.0, 6.0, 0.0),
        AttributeSpec {
            missing_rate: 0.6,
            ..cat("deploy_where", names(&["iraq", "afghanistan", "kuwait", "germany", "korea", "other"]), 0.0)
        },
    ]
}

/// Generative constants of the risk outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskModel {
    /// Extra attributes that measure the latent trait.
    pub informative_extra: usize,
    /// Extra attributes missing for more than half of the nodes.
    pub sparse_extra: usize,
    pub trait_loading: f64,
    /// Weight of the mean neighbor base score over the true network.
    pub exposure_weight: f64,
    pub noise: f64,
    /// Per-indicator intercepts and slopes on the total score.
    pub intercepts: [f64; 4],
    pub slopes: [f64; 4],
}

impl Default for RiskModel {
    fn default() -> Self {
        RiskModel {
            informative_extra: 30,
            sparse_extra: 20,
            trait_loading: 0.8,
            exposure_weight: 1.5,
            noise: 0.3,
            intercepts: [1.5, 1.7, 1.3, 1.4],
            slopes: [0.6, 0.8, 0.4, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n: usize,
    /// Expected number of reported edge rows.
    pub target_edges: usize,
    pub pair_cases: usize,
    /// True links reported with low confidence.
    pub existence_true: usize,
    /// Reported links whose real alter is outside the network.
    pub out_of_network: usize,
    pub extra_attributes: usize,
    /// Pair-case decoys come from nodes at or above this similarity quantile to the true alter.
    pub decoy_quantile: f64,
    pub attributes: Vec<AttributeSpec>,
    pub risk: RiskModel,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 242,
            target_edges: 275,
            pair_cases: 4,
            existence_true: 75,
            out_of_network: 8,
            extra_attributes: 271,
            decoy_quantile: 0.9,
            attributes: default_attributes(),
            risk: RiskModel::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Default population with many more ambiguous rows, used for the
    /// corrected-vs-original risk comparison.
    pub fn heavy_corruption() -> Self {
        SynthConfig {
            pair_cases: 30,
            existence_true: 30,
            out_of_network: 70,
            ..SynthConfig::default()
        }
    }

    /// Expected number of true links: reported rows minus decoy and out-of-network rows.
    pub fn true_edge_target(&self) -> f64 {
        self.target_edges as f64 - self.pair_cases as f64 - self.out_of_network as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        let max_pairs = self.n * (self.n - 1) / 2;
        if self.true_edge_target() <= 0.0 || self.target_edges >= max_pairs {
            return bad(format!(
                "edge target {} infeasible for {} nodes ({} pairs)",
                self.target_edges, self.n, max_pairs
            ));
        }
        if !(0.0..1.0).contains(&self.decoy_quantile) {
            return bad("decoy_quantile must be in [0, 1)".into());
        }
        if self.risk.informative_extra + self.risk.sparse_extra > self.extra_attributes {
            return bad("informative + sparse extra attributes exceed extra_attributes".into());
        }
        let mut seen = HashSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) || a.name == "PID" {
                return bad(format!("duplicate or reserved attribute name {}", a.name));
            }
            if !(0.0..=1.0).contains(&a.missing_rate) {
                return bad(format!("missing_rate of {} outside [0, 1]", a.name));
            }
            match &a.kind {
                AttributeKind::Categorical { levels } if levels.is_empty() => {
                    return bad(format!("{} has no levels", a.name));
                }
                AttributeKind::Numeric { min, max, .. } if !(min <= max) => {
                    return bad(format!("{} has min > max", a.name));
                }
                AttributeKind::Binary { p } if !(0.0..=1.0).contains(p) => {
                    return bad(format!("{} has p outside [0, 1]", a.name));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Sampled attribute values before rendering: category index, number or flag.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Missing,
    Level(usize),
    Number(f64),
    Flag(bool),
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub nodes: NodeTable,
    /// Reported rows: confident links plus uncertain planted rows.
    pub edges: EdgeTable,
    /// Ground-truth links.
    pub true_edges: Vec<(usize, usize)>,
    /// Reported list with decoys substituted and false links kept, all marked confident.
    pub original_edges: EdgeTable,
    /// Planted cases with ground truth.
    pub cases: Vec<AmbiguityCase>,
    /// Raw indicator sums per node.
    pub risk_scores: Vec<f64>,
    /// Latent risk trait per node.
    pub latent_trait: Vec<f64>,
    /// Homophily intercept hitting the edge target in expectation.
    pub intercept: f64,
}

fn sample_attribute<R: Rng>(spec: &AttributeSpec, rng: &mut R) -> Value {
    if spec.missing_rate > 0.0 && rng.random_bool(spec.missing_rate) {
        return Value::Missing;
    }
    match &spec.kind {
        AttributeKind::Categorical { levels } => Value::Level(rng.random_range(0..levels.len())),
        AttributeKind::Numeric { min, max, integer } => {
            let v = if min == max { *min } else { rng.random_range(*min..=*max) };
            Value::Number(if *integer { v.round() } else { v })
        }
        AttributeKind::Binary { p } => Value::Flag(rng.random_bool(*p)),
    }
}

/// Pairwise homophily similarity over sampled attributes. Numeric gaps are
/// measured in units of the attribute's range; missing values contribute 0.
fn similarity(specs: &[AttributeSpec], values: &[Vec<Value>], u: usize, v: usize) -> f64 {
    let mut s = 0.0;
    for (a, spec) in specs.iter().enumerate() {
        if spec.beta == 0.0 {
            continue;
        }
        s += match (values[a][u], values[a][v], &spec.kind) {
            (Value::Level(x), Value::Level(y), _) => spec.beta * (x == y) as u8 as f64,
            (Value::Flag(x), Value::Flag(y), _) => spec.beta * (x == y) as u8 as f64,
            (Value::Number(x), Value::Number(y), AttributeKind::Numeric { min, max, .. }) => {
                let range = (max - min).max(1e-12);
                // ±1 range maps to about 3.5 standard deviations of a uniform variable
                -spec.beta * 3.5 * (x - y).abs() / range
            }
            _ => 0.0,
        };
    }
    s
}

/// Intercept `b` with `Σ logistic(s + b) = target` by bisection.
pub fn calibrate_intercept(similarities: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < similarities.len() as f64) {
        return Err(Error::InvalidParameter(format!(
            "edge target {target} infeasible for {} pairs",
            similarities.len()
        )));
    }
    let expected = |b: f64| similarities.iter().map(|&s| logistic(s + b)).sum::<f64>();
    let smax = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let smin = similarities.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (-smax - 60.0, -smin + 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn clamp_round(x: f64, (lo, hi): (i32, i32)) -> f64 {
    x.round().clamp(lo as f64, hi as f64)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Generate a dataset. Every random stage draws from its own seeded stream.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let n = cfg.n;
    let specs = &cfg.attributes;

    let mut rng = seed::stage_rng(cfg.seed, "synth-attributes");
    let values: Vec<Vec<Value>> = specs
        .iter()
        .map(|s| (0..n).map(|_| sample_attribute(s, &mut rng)).collect())
        .collect();
    // deployments only for nodes that deployed
    let deploy_ever = specs.iter().position(|s| s.name == "deploy_ever");
    let deployments = specs.iter().position(|s| s.name == "Deployments");
    let mut values = values;
    if let (Some(e), Some(d)) = (deploy_ever, deployments) {
        for i in 0..n {
            if values[e][i] == Value::Flag(false) && values[d][i] != Value::Missing {
                values[d][i] = Value::Number(0.0);
            }
        }
    }

    // homophily links
    let mut all_pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut sims = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            all_pairs.push((u, v));
            sims.push(similarity(specs, &values, u, v));
        }
    }
    let intercept = calibrate_intercept(&sims, cfg.true_edge_target())?;
    let mut rng = seed::stage_rng(cfg.seed, "synth-edges");
    let true_edges: Vec<(usize, usize)> = all_pairs
        .iter()
        .zip(&sims)
        .filter(|(_, &s)| rng.random_bool(logistic(s + intercept)))
        .map(|(&p, _)| p)
        .collect();
    let true_set: HashSet<(usize, usize)> = true_edges.iter().copied().collect();
    let needed = cfg.pair_cases + cfg.existence_true;
    if true_edges.len() < needed {
        return Err(Error::TooFewEdges {
            needed,
            got: true_edges.len(),
        });
    }

    // ambiguity plan
    let mut rng = seed::stage_rng(cfg.seed, "synth-ambiguity");
    let mut order: Vec<usize> = (0..true_edges.len()).collect();
    order.shuffle(&mut rng);
    let oriented = |rng: &mut seed::Rng, (a, b): (usize, usize)| if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut uncertain_rows: Vec<(usize, usize)> = Vec::new();
    let mut original_rows: Vec<(usize, usize)> = Vec::new();
    let mut cases = Vec::new();
    let sim_of = |u: usize, v: usize| similarity(specs, &values, u, v);

    let mut cursor = order.iter();
    for k in 0..cfg.pair_cases {
        let &idx = cursor.next().expect("enough true edges checked above");
        let (u, v1) = oriented(&mut rng, true_edges[idx]);
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .filter(|&w| w != u && w != v1 && !true_set.contains(&pair(u, w)) && !used.contains(&pair(u, w)))
            .map(|w| (sim_of(v1, w), w))
            .collect();
        if candidates.is_empty() {
            return Err(Error::NoDecoy { attempts: n });
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let top = ((1.0 - cfg.decoy_quantile) * candidates.len() as f64).ceil().max(1.0) as usize;
        let v2 = candidates[..top].choose(&mut rng).unwrap().1;
        used.insert(pair(u, v1));
        used.insert(pair(u, v2));
        // row order within a case is randomized so position carries no signal
        let (a, b) = if rng.random_bool(0.5) { (v1, v2) } else { (v2, v1) };
        uncertain_rows.push((u, a));
        uncertain_rows.push((u, b));
        original_rows.push((u, v2));
        cases.push(AmbiguityCase::pair(format!("pair-{k}"), u, a, b, Provenance::Planted)?.with_truth(Truth::Candidate(v1)));
    }
    for k in 0..cfg.existence_true {
        let &idx = cursor.next().expect("enough true edges checked above");
        let (u, v) = oriented(&mut rng, true_edges[idx]);
        used.insert(pair(u, v));
        uncertain_rows.push((u, v));
        original_rows.push((u, v));
        cases.push(AmbiguityCase::existence(format!("exist-{k}"), u, v, Provenance::Planted)?.with_truth(Truth::Exists(true)));
    }
    let confident: Vec<(usize, usize)> = cursor.map(|&idx| oriented(&mut rng, true_edges[idx])).collect();
    let mut attempts = 0;
    let mut k = 0;
    while k < cfg.out_of_network {
        attempts += 1;
        if attempts > 1000 * (cfg.out_of_network + 1) {
            return Err(Error::TooDense { wanted: cfg.out_of_network });
        }
        let u = rng.random_range(0..n);
        let w = rng.random_range(0..n);
        if u == w || true_set.contains(&pair(u, w)) || used.contains(&pair(u, w)) {
            continue;
        }
        used.insert(pair(u, w));
        uncertain_rows.push((u, w));
        original_rows.push((u, w));
        cases.push(AmbiguityCase::existence(format!("oon-{k}"), u, w, Provenance::Planted)?.with_truth(Truth::Exists(false)));
        k += 1;
    }

    let mut rows: Vec<Edge> = confident
        .iter()
        .map(|&(src, dst)| Edge {
            src,
            dst,
            confidence: Confidence::Confident,
        })
        .collect();
    rows.extend(uncertain_rows.iter().map(|&(src, dst)| Edge {
        src,
        dst,
        confidence: Confidence::Uncertain,
    }));
    let edges = EdgeTable::new(rows)?;
    let original_edges = EdgeTable::new(
        confident
            .iter()
            .chain(&original_rows)
            .map(|&(src, dst)| Edge {
                src,
                dst,
                confidence: Confidence::Confident,
            })
            .collect(),
    )?;

    // risk outcome
    let risk = &cfg.risk;
    let mut rng = seed::stage_rng(cfg.seed, "synth-risk");
    let latent: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let romantic = specs.iter().position(|s| s.name == "Romantic");
    let base: Vec<f64> = (0..n)
        .map(|i| {
            let mut b = latent[i];
            if let Some(r) = romantic {
                if values[r][i] == Value::Flag(false) {
                    b += 0.3;
                }
            }
            if let Some(d) = deployments {
                if let Value::Number(x) = values[d][i] {
                    b += 0.1 * (x - 1.5);
                }
            }
            b
        })
        .collect();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &true_edges {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let total: Vec<f64> = (0..n)
        .map(|i| {
            let exposure = if nbrs[i].is_empty() {
                0.0
            } else {
                nbrs[i].iter().map(|&j| base[j]).sum::<f64>() / nbrs[i].len() as f64
            };
            base[i] + risk.exposure_weight * exposure + risk.noise * normal(&mut rng)
        })
        .collect();
    let indicators: Vec<[f64; 4]> = total
        .iter()
        .map(|&t| {
            let mut items = [0.0; 4];
            for k in 0..4 {
                let x = risk.intercepts[k] + risk.slopes[k] * t + 0.3 * normal(&mut rng);
                items[k] = clamp_round(x, INDICATOR_RANGES[k]);
            }
            items
        })
        .collect();
    let risk_scores: Vec<f64> = indicators.iter().map(|r| r.iter().sum()).collect();

    // extra attribute block
    let mut rng = seed::stage_rng(cfg.seed, "synth-extra");
    let mut extra_cols = Vec::with_capacity(cfg.extra_attributes);
    for e in 0..cfg.extra_attributes {
        let name = format!("{EXTRA_PREFIX}{:03}", e + 1);
        let informative = e < risk.informative_extra;
        let sparse = !informative && e < risk.informative_extra + risk.sparse_extra;
        let missing = if sparse { rng.random_range(0.55..0.85) } else { 0.02 };
        let (kind, cells): (ColumnKind, Vec<Cell>) = if !informative && e % 10 == 7 {
            let cells = (0..n)
                .map(|_| {
                    if rng.random_bool(missing) {
                        Cell::Missing
                    } else {
                        Cell::Flag(rng.random_bool(0.3))
                    }
                })
                .collect();
            (ColumnKind::Binary, cells)
        } else if !informative && e % 17 == 5 {
            let cells = (0..n)
                .map(|_| {
                    if rng.random_bool(missing) {
                        Cell::Missing
                    } else {
                        Cell::Category(["low", "mid", "high"][rng.random_range(0..3)].to_string())
                    }
                })
                .collect();
            (ColumnKind::Categorical, cells)
        } else {
            let cells = (0..n)
                .map(|i| {
                    let signal = if informative { risk.trait_loading * latent[i] } else { 0.0 };
                    let x = clamp_round(3.0 + signal + 0.8 * normal(&mut rng), (1, 5));
                    if rng.random_bool(missing) {
                        Cell::Missing
                    } else {
                        Cell::Number(x)
                    }
                })
                .collect();
            (ColumnKind::Numeric, cells)
        };
        extra_cols.push(Column { name, kind, cells });
    }

    let mut columns: Vec<Column> = specs
        .iter()
        .zip(&values)
        .map(|(spec, vals)| {
            let kind = match spec.kind {
                AttributeKind::Categorical { .. } => ColumnKind::Categorical,
                AttributeKind::Numeric { .. } => ColumnKind::Numeric,
                AttributeKind::Binary { .. } => ColumnKind::Binary,
            };
            let cells = vals
                .iter()
                .map(|v| match (*v, &spec.kind) {
                    (Value::Missing, _) => Cell::Missing,
                    (Value::Level(k), AttributeKind::Categorical { levels }) => Cell::Category(levels[k].clone()),
                    (Value::Number(x), _) => Cell::Number(x),
                    (Value::Flag(b), _) => Cell::Flag(b),
                    _ => unreachable!("value kind follows attribute kind"),
                })
                .collect();
            Column {
                name: spec.name.clone(),
                kind,
                cells,
            }
        })
        .collect();
    columns.extend(extra_cols);
    for (k, name) in INDICATOR_COLUMNS.iter().enumerate() {
        columns.push(Column {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            cells: indicators.iter().map(|r| Cell::Number(r[k])).collect(),
        });
    }
    let width = n.to_string().len().max(3);
    let pids: Vec<String> = (1..=n).map(|i| format!("P{i:0width$}")).collect();
    let nodes = NodeTable::new("PID", pids, columns)?;

    Ok(SynthDataset {
        nodes,
        edges,
        true_edges,
        original_edges,
        cases,
        risk_scores,
        latent_trait: latent,
        intercept,
    })
}

/// File names written by [`write_dataset`].
pub struct DatasetFiles;

impl DatasetFiles {
    pub const NODES: &'static str = "nodes.csv";
    pub const SCHEMA: &'static str = "schema.json";
    pub const EDGES: &'static str = "edges.csv";
    pub const EDGES_ORIGINAL: &'static str = "edges_original.csv";
    pub const EDGES_TRUE: &'static str = "edges_true.csv";
    pub const CASES: &'static str = "cases.csv";
    pub const TRUTH: &'static str = "truth.csv";
}

pub fn write_dataset(dir: &Path, data: &SynthDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_nodes(&dir.join(DatasetFiles::NODES), &data.nodes)?;
    Schema::from_table(&data.nodes).save(&dir.join(DatasetFiles::SCHEMA))?;
    write_edges(&dir.join(DatasetFiles::EDGES), &data.edges, &data.nodes)?;
    write_edges(&dir.join(DatasetFiles::EDGES_ORIGINAL), &data.original_edges, &data.nodes)?;
    let truth = EdgeTable::new(
        data.true_edges
            .iter()
            .map(|&(src, dst)| Edge {
                src,
                dst,
                confidence: Confidence::Confident,
            })
            .collect(),
    )?;
    write_edges(&dir.join(DatasetFiles::EDGES_TRUE), &truth, &data.nodes)?;
    write_cases(&dir.join(DatasetFiles::CASES), &data.cases, &data.nodes, false)?;
    write_cases(&dir.join(DatasetFiles::TRUTH), &data.cases, &data.nodes, true)
}

/// Columns that may never be used as predictors or disambiguation features.
pub fn non_disambiguation_columns(nodes: &NodeTable) -> Vec<String> {
    nodes
        .columns
        .iter()
        .filter(|c| c.name.starts_with(EXTRA_PREFIX) || INDICATOR_COLUMNS.contains(&c.name.as_str()))
        .map(|c| c.name.clone())
        .collect()
}

/// Mean homophily similarity of linked vs unlinked pairs, for diagnostics.
pub fn similarity_gap(cfg: &SynthConfig, data: &SynthDataset) -> (f64, f64) {
    let linked: BTreeSet<(usize, usize)> = data.true_edges.iter().copied().collect();
    let values: Vec<Vec<Value>> = cfg
        .attributes
        .iter()
        .map(|spec| {
            let col = data.nodes.column(&spec.name).expect("generated column");
            col.cells
                .iter()
                .map(|c| match (c, &spec.kind) {
                    (Cell::Missing, _) => Value::Missing,
                    (Cell::Category(s), AttributeKind::Categorical { levels }) => {
                        Value::Level(levels.iter().position(|l| l == s).unwrap_or(usize::MAX))
                    }
                    (Cell::Number(x), _) => Value::Number(*x),
                    (Cell::Flag(b), _) => Value::Flag(*b),
                    _ => Value::Missing,
                })
                .collect()
        })
        .collect();
    let (mut ls, mut ln, mut us, mut un) = (0.0, 0usize, 0.0, 0usize);
    for u in 0..cfg.n {
        for v in (u + 1)..cfg.n {
            let s = similarity(&cfg.attributes, &values, u, v);
            if linked.contains(&(u, v)) {
                ls += s;
                ln += 1;
            } else {
                us += s;
                un += 1;
            }
        }
    }
    (ls / ln.max(1) as f64, us / un.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n: 60,
            target_edges: 80,
            pair_cases: 3,
            existence_true: 10,
            out_of_network: 4,
            extra_attributes: 12,
            risk: RiskModel {
                informative_extra: 4,
                sparse_extra: 2,
                ..RiskModel::default()
            },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn accounting_of_rows_and_cases() {
        let cfg = small();
        let d = generate(&cfg).unwrap();
        let uncertain = d.edges.count(Confidence::Uncertain);
        assert_eq!(uncertain, 2 * cfg.pair_cases + cfg.existence_true + cfg.out_of_network);
        assert_eq!(d.cases.len(), cfg.pair_cases + cfg.existence_true + cfg.out_of_network);
        assert_eq!(d.edges.count(Confidence::Confident), d.true_edges.len() - cfg.pair_cases - cfg.existence_true);
        assert_eq!(d.original_edges.len(), d.edges.len() - cfg.pair_cases);
        let truth: HashSet<_> = d.true_edges.iter().copied().collect();
        for c in &d.cases {
            match c.truth.unwrap() {
                Truth::Candidate(v) => {
                    let other = *c.candidates.iter().find(|&&w| w != v).unwrap();
                    assert!(truth.contains(&pair(c.source, v)));
                    assert!(!truth.contains(&pair(c.source, other)));
                }
                Truth::Exists(b) => assert_eq!(truth.contains(&pair(c.source, c.candidates[0])), b),
            }
        }
    }

    #[test]
    fn infeasible_targets_error() {
        let cfg = SynthConfig {
            n: 5,
            target_edges: 10,
            ..small()
        };
        assert!(generate(&cfg).is_err());
        assert!(generate(&SynthConfig { n: 1, ..small() }).is_err());
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.cases, b.cases);
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.edges, c.edges);
    }

    #[test]
    fn intercept_hits_target_in_expectation() {
        let sims = vec![0.0, 1.0, -1.0, 2.0, 0.5];
        let b = calibrate_intercept(&sims, 2.0).unwrap();
        let e: f64 = sims.iter().map(|&s| logistic(s + b)).sum();
        assert!((e - 2.0).abs() < 1e-9);
        assert!(calibrate_intercept(&sims, 5.0).is_err());
    }

    #[test]
    fn indicators_within_ranges() {
        let d = generate(&small()).unwrap();
        for (k, name) in INDICATOR_COLUMNS.iter().enumerate() {
            for c in &d.nodes.column(name).unwrap().cells {
                let Cell::Number(v) = c else { panic!("indicator cell {c:?}") };
                assert!(*v >= INDICATOR_RANGES[k].0 as f64 && *v <= INDICATOR_RANGES[k].1 as f64);
            }
        }
        assert!(d.risk_scores.iter().all(|&s| (3.0..=18.0).contains(&s)));
    }
}
