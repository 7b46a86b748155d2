//! Pair disambiguation and link existence from embedding distances.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write as _;
use std::path::Path;

use ndarray::ArrayView1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{pair, sample_non_edges, Confidence, Edge, EdgeTable, NodeTable};
use crate::error::{Error, Result};
use crate::gat::Embeddings;

pub const DEFAULT_MARGIN_EPSILON: f64 = 1e-6;
/// Decoy draws per sampled edge before moving on to another edge.
const DECOY_ATTEMPTS: usize = 64;
const MAX_EDGE_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// `1 − cos(z_u, z_v)`; zero vectors are at distance 1 from everything.
    Cosine,
}

pub fn embedding_distance(zu: ArrayView1<f64>, zv: ArrayView1<f64>) -> f64 {
    zu.iter().zip(zv.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn cosine_distance(zu: ArrayView1<f64>, zv: ArrayView1<f64>) -> f64 {
    let nu = zu.dot(&zu).sqrt();
    let nv = zv.dot(&zv).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    1.0 - zu.dot(&zv) / (nu * nv)
}

impl DistanceMetric {
    pub fn distance(&self, z: &Embeddings, u: usize, v: usize) -> f64 {
        match self {
            DistanceMetric::Euclidean => embedding_distance(z.row(u), z.row(v)),
            DistanceMetric::Cosine => cosine_distance(z.row(u), z.row(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Pair,
    Existence,
}

impl CaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseKind::Pair => "pair",
            CaseKind::Existence => "existence",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "pair" => Ok(CaseKind::Pair),
            "existence" => Ok(CaseKind::Existence),
            other => Err(Error::InvalidCase(format!("unknown case kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Simulated,
    Planted,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Simulated => "simulated",
            Provenance::Planted => "planted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "" | "real" => Ok(Provenance::Real),
            "simulated" => Ok(Provenance::Simulated),
            "planted" => Ok(Provenance::Planted),
            other => Err(Error::InvalidCase(format!("unknown provenance {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truth {
    /// Node index of the true candidate of a pair case.
    Candidate(usize),
    Exists(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityCase {
    pub id: String,
    pub kind: CaseKind,
    pub source: usize,
    /// Two entries for pair cases, one for existence cases.
    pub candidates: Vec<usize>,
    pub truth: Option<Truth>,
    pub provenance: Provenance,
}

impl AmbiguityCase {
    pub fn pair(id: impl Into<String>, u: usize, v1: usize, v2: usize, provenance: Provenance) -> Result<Self> {
        let c = AmbiguityCase {
            id: id.into(),
            kind: CaseKind::Pair,
            source: u,
            candidates: vec![v1, v2],
            truth: None,
            provenance,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn existence(id: impl Into<String>, u: usize, v: usize, provenance: Provenance) -> Result<Self> {
        let c = AmbiguityCase {
            id: id.into(),
            kind: CaseKind::Existence,
            source: u,
            candidates: vec![v],
            truth: None,
            provenance,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_truth(mut self, truth: Truth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidCase(format!("case {}: {msg}", self.id)));
        match self.kind {
            CaseKind::Pair => {
                if self.candidates.len() != 2 {
                    return bad("pair case needs exactly two candidates");
                }
                if self.candidates[0] == self.candidates[1] {
                    return bad("pair candidates must differ");
                }
            }
            CaseKind::Existence => {
                if self.candidates.len() != 1 {
                    return bad("existence case needs exactly one candidate");
                }
            }
        }
        if self.candidates.contains(&self.source) {
            return bad("source cannot be its own candidate");
        }
        match (self.kind, self.truth) {
            (CaseKind::Pair, Some(Truth::Candidate(t))) if !self.candidates.contains(&t) => {
                bad("truth is not one of the candidates")
            }
            (CaseKind::Pair, Some(Truth::Exists(_))) | (CaseKind::Existence, Some(Truth::Candidate(_))) => {
                bad("truth does not match case kind")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    /// Validation F1 at `tau`.
    pub f1: f64,
    pub n_validation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Chosen(usize),
    Exists(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub case_id: String,
    pub kind: CaseKind,
    pub source: usize,
    pub candidates: Vec<usize>,
    pub decision: Decision,
    pub distances: Vec<f64>,
    pub threshold: Option<f64>,
    pub margin: f64,
    pub low_confidence: bool,
}

impl Resolution {
    /// The link this resolution adds to the graph, if any.
    pub fn accepted_link(&self) -> Option<(usize, usize)> {
        match self.decision {
            Decision::Chosen(v) => Some((self.source, v)),
            Decision::Exists(true) => Some((self.source, self.candidates[0])),
            Decision::Exists(false) => None,
        }
    }

    pub fn correct(&self, truth: Truth) -> bool {
        match (self.decision, truth) {
            (Decision::Chosen(a), Truth::Candidate(b)) => a == b,
            (Decision::Exists(a), Truth::Exists(b)) => a == b,
            _ => false,
        }
    }
}

fn check_node(z: &Embeddings, v: usize) -> Result<()> {
    if v >= z.n() {
        return Err(Error::InvalidCase(format!("node {v} has no embedding")));
    }
    Ok(())
}

/// Pick the candidate closer to `u`. Exact ties go to the lower node index
/// and are always flagged low-confidence.
pub fn resolve_pair(
    case_id: &str,
    u: usize,
    v1: usize,
    v2: usize,
    z: &Embeddings,
    metric: DistanceMetric,
    margin_epsilon: f64,
) -> Result<Resolution> {
    if u == v1 || u == v2 || v1 == v2 {
        return Err(Error::InvalidCase(format!("case {case_id}: source and candidates must be distinct")));
    }
    for v in [u, v1, v2] {
        check_node(z, v)?;
    }
    let d1 = metric.distance(z, u, v1);
    let d2 = metric.distance(z, u, v2);
    let chosen = if d1 < d2 {
        v1
    } else if d2 < d1 {
        v2
    } else {
        v1.min(v2)
    };
    let margin = (d1 - d2).abs();
    Ok(Resolution {
        case_id: case_id.to_string(),
        kind: CaseKind::Pair,
        source: u,
        candidates: vec![v1, v2],
        decision: Decision::Chosen(chosen),
        distances: vec![d1, d2],
        threshold: None,
        margin,
        low_confidence: d1 == d2 || margin < margin_epsilon,
    })
}

/// Declare `(u, v)` a link iff `d(u, v) < τ`.
pub fn link_exists(
    case_id: &str,
    u: usize,
    v: usize,
    z: &Embeddings,
    tau: f64,
    metric: DistanceMetric,
    margin_epsilon: f64,
) -> Result<Resolution> {
    if u == v {
        return Err(Error::InvalidCase(format!("case {case_id}: self-link")));
    }
    check_node(z, u)?;
    check_node(z, v)?;
    let d = metric.distance(z, u, v);
    let margin = (d - tau).abs();
    Ok(Resolution {
        case_id: case_id.to_string(),
        kind: CaseKind::Existence,
        source: u,
        candidates: vec![v],
        decision: Decision::Exists(d < tau),
        distances: vec![d],
        threshold: Some(tau),
        margin,
        low_confidence: margin < margin_epsilon,
    })
}

pub fn resolve_case(
    case: &AmbiguityCase,
    z: &Embeddings,
    tau: Option<f64>,
    metric: DistanceMetric,
    margin_epsilon: f64,
) -> Result<Resolution> {
    case.validate()?;
    match case.kind {
        CaseKind::Pair => resolve_pair(
            &case.id,
            case.source,
            case.candidates[0],
            case.candidates[1],
            z,
            metric,
            margin_epsilon,
        ),
        CaseKind::Existence => {
            let tau = tau.ok_or_else(|| Error::InvalidParameter("existence cases need a calibrated threshold".into()))?;
            link_exists(&case.id, case.source, case.candidates[0], z, tau, metric, margin_epsilon)
        }
    }
}

/// F1 as an exact fraction `2tp / (2tp + fp + fn)`.
fn f1_fraction(tp: usize, fp: usize, fn_: usize) -> (usize, usize) {
    (2 * tp, 2 * tp + fp + fn_)
}

fn fraction_value((num, den): (usize, usize)) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Candidate cutoffs: midpoints between consecutive distinct distances plus
/// one cutoff above the largest distance.
pub fn candidate_cutoffs(distances: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut cuts: Vec<f64> = sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if let Some(&max) = sorted.last() {
        cuts.push(max + max.abs().max(1.0));
    }
    cuts
}

/// Choose τ maximizing validation F1 of `exists ⇔ d < τ`; ties go to the
/// larger cutoff, which has at least the recall of any smaller one.
pub fn calibrate_threshold(distances: &[f64], labels: &[bool]) -> Result<Threshold> {
    if distances.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: distances.len(),
            got: labels.len(),
        });
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::OneClass);
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidParameter("distances must be finite and non-negative".into()));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let positives = labels.iter().filter(|&&l| l).count();

    // sweep cutoffs upward; everything strictly below the cutoff is predicted positive
    let mut best: Option<((usize, usize), f64)> = None;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    for tau in candidate_cutoffs(distances) {
        while k < order.len() && distances[order[k]] < tau {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let f = f1_fraction(tp, fp, positives - tp);
        let better = match best {
            None => true,
            // f ≥ best, compared exactly: a/b ≥ c/d ⇔ a·d ≥ c·b
            Some((b, _)) => f.0 * b.1.max(1) >= b.0 * f.1.max(1),
        };
        if better {
            best = Some((f, tau));
        }
    }
    let (f, tau) = best.ok_or(Error::Empty("validation distances"))?;
    Ok(Threshold {
        tau,
        f1: fraction_value(f),
        n_validation: distances.len(),
    })
}

fn all_nodes_except(n: usize, excluded: &[usize]) -> usize {
    n - excluded.iter().collect::<BTreeSet<_>>().len()
}

/// Pair cases from test edges: `(u, v1)` is a held-out link, `(u, v2)` is
/// absent from `all_pairs`. Edges are drawn with replacement and oriented at random.
pub fn simulate_pair_cases<R: Rng>(
    test: &[(usize, usize)],
    n: usize,
    all_pairs: &HashSet<(usize, usize)>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<AmbiguityCase>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if test.is_empty() {
        return Err(Error::Empty("test edges"));
    }
    let mut cases = Vec::with_capacity(count);
    let mut resamples = 0;
    while cases.len() < count {
        let (a, b) = test[rng.random_range(0..test.len())];
        let (u, v1) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let mut decoy = None;
        if all_nodes_except(n, &[u, v1]) > 0 {
            for _ in 0..DECOY_ATTEMPTS {
                let v2 = rng.random_range(0..n);
                if v2 != u && v2 != v1 && !all_pairs.contains(&pair(u, v2)) {
                    decoy = Some(v2);
                    break;
                }
            }
        }
        match decoy {
            Some(v2) => {
                let id = format!("sim-pair-{}", cases.len());
                cases.push(AmbiguityCase::pair(id, u, v1, v2, Provenance::Simulated)?.with_truth(Truth::Candidate(v1)));
            }
            None => {
                resamples += 1;
                if resamples > MAX_EDGE_RESAMPLES {
                    return Err(Error::NoDecoy {
                        attempts: resamples * DECOY_ATTEMPTS,
                    });
                }
            }
        }
    }
    Ok(cases)
}

/// Balanced existence cases: every test edge plus the same number of non-edges.
pub fn simulate_link_cases<R: Rng>(
    test: &[(usize, usize)],
    n: usize,
    all_pairs: &HashSet<(usize, usize)>,
    rng: &mut R,
) -> Result<Vec<AmbiguityCase>> {
    if test.is_empty() {
        return Err(Error::Empty("test edges"));
    }
    let negatives = sample_non_edges(n, test.len(), all_pairs, rng)?;
    let mut cases = Vec::with_capacity(2 * test.len());
    for (k, &(u, v)) in test.iter().enumerate() {
        cases.push(AmbiguityCase::existence(format!("sim-pos-{k}"), u, v, Provenance::Simulated)?.with_truth(Truth::Exists(true)));
    }
    for (k, (u, v)) in negatives.into_iter().enumerate() {
        cases.push(AmbiguityCase::existence(format!("sim-neg-{k}"), u, v, Provenance::Simulated)?.with_truth(Truth::Exists(false)));
    }
    Ok(cases)
}

/// Existence cases for uncertain edges not already covered by `cases`.
pub fn cases_for_uncertain(edges: &EdgeTable, cases: &[AmbiguityCase]) -> Result<Vec<AmbiguityCase>> {
    let covered: HashSet<(usize, usize)> = cases
        .iter()
        .flat_map(|c| c.candidates.iter().map(move |&v| pair(c.source, v)))
        .collect();
    let mut out = cases.to_vec();
    let mut seen = HashSet::new();
    for e in edges.edges.iter().filter(|e| e.confidence == Confidence::Uncertain) {
        let p = pair(e.src, e.dst);
        if covered.contains(&p) || !seen.insert(p) {
            continue;
        }
        out.push(AmbiguityCase::existence(
            format!("uncertain-{}", out.len()),
            e.src,
            e.dst,
            Provenance::Real,
        )?);
    }
    Ok(out)
}

/// Confident edges followed by `links` as new confident edges, skipping
/// pairs already present.
pub fn assemble_edge_list(edges: &EdgeTable, links: impl IntoIterator<Item = (usize, usize)>) -> Result<EdgeTable> {
    let mut kept: Vec<Edge> = edges
        .edges
        .iter()
        .filter(|e| e.confidence == Confidence::Confident)
        .copied()
        .collect();
    let mut present: HashSet<(usize, usize)> = kept.iter().map(|e| pair(e.src, e.dst)).collect();
    for (u, v) in links {
        if present.insert(pair(u, v)) {
            kept.push(Edge {
                src: u,
                dst: v,
                confidence: Confidence::Confident,
            });
        }
    }
    EdgeTable::new(kept)
}

/// Resolved edge list: every confident edge, then each accepted link as a new
/// confident edge. Links already present are logged but not duplicated.
pub fn resolve_edge_list(
    edges: &EdgeTable,
    cases: &[AmbiguityCase],
    z: &Embeddings,
    tau: Option<f64>,
    metric: DistanceMetric,
    margin_epsilon: f64,
) -> Result<(EdgeTable, Vec<Resolution>)> {
    let log = cases
        .iter()
        .map(|case| resolve_case(case, z, tau, metric, margin_epsilon))
        .collect::<Result<Vec<_>>>()?;
    let table = assemble_edge_list(edges, log.iter().filter_map(Resolution::accepted_link))?;
    Ok((table, log))
}

/// Accuracy of resolutions against their cases' ground truth.
pub fn accuracy(cases: &[AmbiguityCase], resolutions: &[Resolution]) -> Result<f64> {
    if cases.len() != resolutions.len() {
        return Err(Error::DimensionMismatch {
            expected: cases.len(),
            got: resolutions.len(),
        });
    }
    let mut total = 0;
    let mut correct = 0;
    for (c, r) in cases.iter().zip(resolutions) {
        if let Some(t) = c.truth {
            total += 1;
            correct += r.correct(t) as usize;
        }
    }
    if total == 0 {
        return Err(Error::Empty("cases with ground truth"));
    }
    Ok(correct as f64 / total as f64)
}

const CASE_HEADER: [&str; 7] = ["case_id", "kind", "source", "candidate_a", "candidate_b", "truth", "provenance"];

fn render_truth(t: Option<Truth>, nodes: &NodeTable) -> String {
    match t {
        None => String::new(),
        Some(Truth::Candidate(v)) => nodes.pids[v].clone(),
        Some(Truth::Exists(b)) => b.to_string(),
    }
}

pub fn write_cases(path: &Path, cases: &[AmbiguityCase], nodes: &NodeTable, include_truth: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(CASE_HEADER).map_err(|e| Error::csv(path, e))?;
    for c in cases {
        let truth = if include_truth { render_truth(c.truth, nodes) } else { String::new() };
        let b = c.candidates.get(1).map(|&v| nodes.pids[v].as_str()).unwrap_or("");
        w.write_record([
            c.id.as_str(),
            c.kind.as_str(),
            &nodes.pids[c.source],
            &nodes.pids[c.candidates[0]],
            b,
            &truth,
            c.provenance.as_str(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_cases(path: &Path, nodes: &NodeTable) -> Result<Vec<AmbiguityCase>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let pos = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| pos(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (id_at, kind_at, src_at, a_at) = (required("case_id")?, required("kind")?, required("source")?, required("candidate_a")?);
    let (b_at, truth_at, prov_at) = (pos("candidate_b"), pos("truth"), pos("provenance"));

    let mut cases = Vec::new();
    let mut ids = HashSet::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let field = |at: Option<usize>| at.and_then(|i| rec.get(i)).unwrap_or("").trim();
        let id = field(Some(id_at)).to_string();
        if !ids.insert(id.clone()) {
            return Err(Error::InvalidCase(format!("duplicate case id {id}")));
        }
        let kind = CaseKind::parse(field(Some(kind_at)))?;
        let u = nodes.require(field(Some(src_at)))?;
        let a = nodes.require(field(Some(a_at)))?;
        let provenance = Provenance::parse(field(prov_at))?;
        let mut case = match kind {
            CaseKind::Pair => AmbiguityCase::pair(id, u, a, nodes.require(field(b_at))?, provenance)?,
            CaseKind::Existence => AmbiguityCase::existence(id, u, a, provenance)?,
        };
        let truth = field(truth_at);
        if !truth.is_empty() {
            case.truth = Some(match kind {
                CaseKind::Pair => Truth::Candidate(nodes.require(truth)?),
                CaseKind::Existence => Truth::Exists(
                    truth
                        .parse()
                        .map_err(|_| Error::InvalidCase(format!("bad existence truth {truth:?}")))?,
                ),
            });
            case.validate()?;
        }
        cases.push(case);
    }
    Ok(cases)
}

/// One line of the resolution log, keyed by PIDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub case_id: String,
    pub kind: CaseKind,
    pub source: String,
    pub candidates: Vec<String>,
    /// Chosen PID for pair cases.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chosen: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exists: Option<bool>,
    pub distances: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    pub margin: f64,
    pub low_confidence: bool,
}

impl ResolutionRecord {
    pub fn new(r: &Resolution, nodes: &NodeTable) -> Self {
        let (chosen, exists) = match r.decision {
            Decision::Chosen(v) => (Some(nodes.pids[v].clone()), None),
            Decision::Exists(b) => (None, Some(b)),
        };
        ResolutionRecord {
            case_id: r.case_id.clone(),
            kind: r.kind,
            source: nodes.pids[r.source].clone(),
            candidates: r.candidates.iter().map(|&v| nodes.pids[v].clone()).collect(),
            chosen,
            exists,
            distances: r.distances.clone(),
            threshold: r.threshold,
            margin: r.margin,
            low_confidence: r.low_confidence,
        }
    }
}

impl fmt::Display for ResolutionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&line)
    }
}

pub fn write_resolution_log(path: &Path, log: &[Resolution], nodes: &NodeTable) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in log {
        writeln!(out, "{}", ResolutionRecord::new(r, nodes)).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_resolution_log(path: &Path) -> Result<Vec<ResolutionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
