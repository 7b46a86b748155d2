//! Review session: immutable revision snapshots, the append-only decision
//! log and coder-triggered re-embedding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use alterlink::data::{edges_to_csv, pair, Confidence, ConfidenceFilter, EdgeSplit, EdgeTable, FeatureMatrix, Graph, NodeTable};
use alterlink::disambig::{assemble_edge_list, resolve_case, AmbiguityCase, CaseKind, Resolution, ResolutionRecord};
use alterlink::explain::{explain_link, ExplainConfig, ExplanationRecord};
use alterlink::gat::{self, Checkpoint, Embeddings, GatModel, TrainConfig};
use alterlink::seed;
use alterlink::simulate::{calibrate_on_validation, ResolveConfig};
use serde::{Deserialize, Serialize};

pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const REVISIONS_DIR: &str = "revisions";

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown case {0}")]
    NotFound(String),
    #[error("case {case_id} already has a decision; resend with amend to replace it")]
    Conflict {
        case_id: String,
        existing: Box<DecisionRecord>,
    },
    #[error("recompute in progress")]
    Busy,
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] alterlink::Error),
}

pub type Result<T, E = ReviewError> = std::result::Result<T, E>;

/// Everything a session needs besides its state directory.
#[derive(Debug, Clone)]
pub struct SessionInputs {
    pub nodes: NodeTable,
    pub features: FeatureMatrix,
    pub edges: EdgeTable,
    pub cases: Vec<AmbiguityCase>,
    pub checkpoint: Checkpoint,
    pub resolve: ResolveConfig,
    pub explain: ExplainConfig,
    /// Attributes shown in candidate profiles; empty shows all.
    pub profile_columns: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    /// `choice` is the PID of the candidate the coder picked.
    Override { choice: String },
    Reject,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(default)]
    pub coder: Option<String>,
    #[serde(default)]
    pub amend: bool,
    /// Free-form confidence note.
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub seq: u64,
    pub case_id: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub coder: String,
    #[serde(default)]
    pub note: Option<String>,
    pub amend: bool,
    pub revision: u64,
    pub timestamp_ms: u64,
    /// Model suggestion shown when the verdict was given.
    pub suggestion: ResolutionRecord,
    /// Confirmed link `(source, alter)` as PIDs, if the verdict adds one.
    pub staged: Option<(String, String)>,
}

impl DecisionRecord {
    /// Skips defer to the model; every other verdict is authoritative.
    pub fn is_human_call(&self) -> bool {
        self.verdict != Verdict::Skip
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StatusFilter {
    Pending,
    Resolved,
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub id: String,
    pub kind: CaseKind,
    pub source: String,
    pub candidates: Vec<String>,
    pub status: String,
    pub suggestion: ResolutionRecord,
    pub margin: f64,
    pub low_confidence: bool,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub pid: String,
    pub distance: f64,
    pub profile: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDetail {
    pub summary: CaseSummary,
    pub source_profile: Vec<(String, String)>,
    pub candidates: Vec<CandidateView>,
    /// Calibrated cutoff, for existence cases.
    pub tau: Option<f64>,
    pub explanations: Vec<ExplanationRecord>,
    pub history: Vec<DecisionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecomputeReport {
    pub revision: u64,
    pub recomputed: bool,
    pub message: String,
    pub new_confirmed: usize,
    pub tau: f64,
    /// Pending cases whose suggestion or margin differs from the previous revision.
    pub changed_pending: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub src: String,
    pub dst: String,
    /// `confident`, `model` or `human`.
    pub origin: String,
    pub case_id: Option<String>,
    pub decision_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportReport {
    pub revision: u64,
    pub edges_csv: String,
    pub rows: Vec<ExportRow>,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionStatus {
    pub session_id: String,
    pub revision: u64,
    pub tau: f64,
    pub pending: usize,
    pub resolved: usize,
    pub confirmed: usize,
    pub unconfirmed_since_revision: usize,
    pub busy: bool,
}

/// Archived state of one revision.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RevisionArchive {
    revision: u64,
    tau: f64,
    confirmed: Vec<(String, String)>,
    suggestions: Vec<ResolutionRecord>,
    checkpoint: Checkpoint,
}

/// Read-only view of one revision.
pub struct Snapshot {
    pub revision: u64,
    pub model: GatModel,
    pub graph: Graph,
    pub embeddings: Embeddings,
    pub tau: f64,
    pub confirmed: BTreeSet<(usize, usize)>,
    /// Aligned with the session's case list.
    pub resolutions: Vec<Resolution>,
    explanations: Mutex<HashMap<String, Arc<Vec<ExplanationRecord>>>>,
}

struct Decisions {
    file: File,
    path: PathBuf,
    log: Vec<DecisionRecord>,
    /// Case id → index of its latest record.
    latest: BTreeMap<String, usize>,
}

pub struct Session {
    inputs: SessionInputs,
    state_dir: PathBuf,
    case_index: HashMap<String, usize>,
    snapshot: RwLock<Arc<Snapshot>>,
    decisions: Mutex<Decisions>,
    busy: AtomicBool,
}

fn io_err(path: &Path, e: std::io::Error) -> ReviewError {
    alterlink::Error::io(path, e).into()
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn revision_path(dir: &Path, revision: u64) -> PathBuf {
    dir.join(REVISIONS_DIR).join(format!("rev-{revision:04}.json"))
}

struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

impl Session {
    /// Open or resume the session stored in `state_dir`.
    pub fn open(inputs: SessionInputs, state_dir: &Path) -> Result<Self> {
        inputs.checkpoint.ensure_compatible(&inputs.features)?;
        if inputs.checkpoint.threshold.is_none() {
            return Err(ReviewError::BadRequest("checkpoint carries no calibrated threshold".into()));
        }
        let mut case_index = HashMap::new();
        for (k, c) in inputs.cases.iter().enumerate() {
            c.validate()?;
            if case_index.insert(c.id.clone(), k).is_some() {
                return Err(ReviewError::BadRequest(format!("duplicate case id {}", c.id)));
            }
        }
        std::fs::create_dir_all(state_dir.join(REVISIONS_DIR)).map_err(|e| io_err(state_dir, e))?;

        let decisions = Self::load_decisions(state_dir, &case_index)?;
        let snap = match latest_archive(state_dir)? {
            Some(archive) => snapshot_from_archive(&inputs, archive)?,
            None => {
                let ck = &inputs.checkpoint;
                let snap = build_snapshot(
                    &inputs,
                    0,
                    ck.model.clone(),
                    ck.graph(inputs.nodes.len())?,
                    ck.threshold.expect("checked above"),
                    BTreeSet::new(),
                )?;
                archive(&inputs, state_dir, &snap)?;
                snap
            }
        };
        Ok(Session {
            snapshot: RwLock::new(Arc::new(snap)),
            inputs,
            state_dir: state_dir.to_path_buf(),
            case_index,
            decisions: Mutex::new(decisions),
            busy: AtomicBool::new(false),
        })
    }

    fn load_decisions(state_dir: &Path, case_index: &HashMap<String, usize>) -> Result<Decisions> {
        let path = state_dir.join(DECISIONS_FILE);
        let mut log: Vec<DecisionRecord> = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| io_err(&path, e))?);
            let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>().map_err(|e| io_err(&path, e))?;
            let n = lines.len();
            for (k, line) in lines.into_iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<DecisionRecord>(&line) {
                    Ok(r) => log.push(r),
                    // a torn final line was never acknowledged
                    Err(e) if k + 1 == n => log::warn!("ignoring incomplete last line of {}: {e}", path.display()),
                    Err(e) => return Err(alterlink::Error::from(e).into()),
                }
            }
        }
        let mut latest = BTreeMap::new();
        for (k, r) in log.iter().enumerate() {
            if !case_index.contains_key(&r.case_id) {
                return Err(ReviewError::BadRequest(format!("decision log names unknown case {}", r.case_id)));
            }
            latest.insert(r.case_id.clone(), k);
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        Ok(Decisions { file, path, log, latest })
    }

    pub fn inputs(&self) -> &SessionInputs {
        &self.inputs
    }

    /// Stable id derived from the starting checkpoint and seed.
    pub fn session_id(&self) -> String {
        let hash = self.inputs.checkpoint.model.param_hash();
        format!("{}-{}", &hash[..12.min(hash.len())], self.inputs.seed)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn revision(&self) -> u64 {
        self.snapshot().revision
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::SeqCst)
    }

    fn case(&self, id: &str) -> Result<usize> {
        self.case_index.get(id).copied().ok_or_else(|| ReviewError::NotFound(id.to_string()))
    }

    fn latest_decisions(&self) -> BTreeMap<String, DecisionRecord> {
        let d = self.decisions.lock().expect("decision lock");
        d.latest.iter().map(|(id, &k)| (id.clone(), d.log[k].clone())).collect()
    }

    fn staged_links(&self) -> Result<BTreeSet<(usize, usize)>> {
        let nodes = &self.inputs.nodes;
        self.latest_decisions()
            .values()
            .filter_map(|r| r.staged.as_ref())
            .map(|(s, d)| Ok(pair(nodes.require(s)?, nodes.require(d)?)))
            .collect()
    }

    fn summary(&self, k: usize, snap: &Snapshot, latest: Option<&DecisionRecord>) -> CaseSummary {
        let c = &self.inputs.cases[k];
        let r = &snap.resolutions[k];
        let nodes = &self.inputs.nodes;
        CaseSummary {
            id: c.id.clone(),
            kind: c.kind,
            source: nodes.pids[c.source].clone(),
            candidates: c.candidates.iter().map(|&v| nodes.pids[v].clone()).collect(),
            status: if latest.is_some() { "resolved" } else { "pending" }.to_string(),
            suggestion: ResolutionRecord::new(r, nodes),
            margin: r.margin,
            low_confidence: r.low_confidence,
            verdict: latest.map(|d| d.verdict.clone()),
        }
    }

    /// Cases ordered by ascending margin, ties by id.
    pub fn list_cases(&self, status: StatusFilter) -> (u64, Vec<CaseSummary>) {
        let snap = self.snapshot();
        let latest = self.latest_decisions();
        let mut out: Vec<CaseSummary> = (0..self.inputs.cases.len())
            .filter_map(|k| {
                let d = latest.get(&self.inputs.cases[k].id);
                let keep = match status {
                    StatusFilter::All => true,
                    StatusFilter::Pending => d.is_none(),
                    StatusFilter::Resolved => d.is_some(),
                };
                keep.then(|| self.summary(k, &snap, d))
            })
            .collect();
        out.sort_by(|a, b| a.margin.total_cmp(&b.margin).then_with(|| a.id.cmp(&b.id)));
        (snap.revision, out)
    }

    fn profile(&self, node: usize) -> Vec<(String, String)> {
        let keep = &self.inputs.profile_columns;
        self.inputs
            .nodes
            .profile(node)
            .into_iter()
            .filter(|(name, _)| keep.is_empty() || keep.contains(name))
            .collect()
    }

    /// Explanations of every (source, candidate) link of case `k` under `snap`.
    pub fn explanations(&self, snap: &Snapshot, k: usize) -> Result<Arc<Vec<ExplanationRecord>>> {
        let c = &self.inputs.cases[k];
        if let Some(hit) = snap.explanations.lock().expect("explanation cache").get(&c.id) {
            return Ok(hit.clone());
        }
        let records = c
            .candidates
            .iter()
            .map(|&v| {
                let e = explain_link(&snap.model, &self.inputs.features, &snap.graph, c.source, v, &self.inputs.explain)?;
                Ok(ExplanationRecord::new(&c.id, &e, &self.inputs.nodes))
            })
            .collect::<Result<Vec<_>>>()?;
        let records = Arc::new(records);
        snap.explanations
            .lock()
            .expect("explanation cache")
            .insert(c.id.clone(), records.clone());
        Ok(records)
    }

    pub fn get_case(&self, id: &str) -> Result<(u64, CaseDetail)> {
        let k = self.case(id)?;
        let snap = self.snapshot();
        let c = &self.inputs.cases[k];
        let r = &snap.resolutions[k];
        let history: Vec<DecisionRecord> = {
            let d = self.decisions.lock().expect("decision lock");
            d.log.iter().filter(|x| x.case_id == id).cloned().collect()
        };
        let candidates = c
            .candidates
            .iter()
            .zip(&r.distances)
            .map(|(&v, &distance)| CandidateView {
                pid: self.inputs.nodes.pids[v].clone(),
                distance,
                profile: self.profile(v),
            })
            .collect();
        let detail = CaseDetail {
            summary: self.summary(k, &snap, history.last()),
            source_profile: self.profile(c.source),
            candidates,
            tau: (c.kind == CaseKind::Existence).then_some(snap.tau),
            explanations: self.explanations(&snap, k)?.as_ref().clone(),
            history,
        };
        Ok((snap.revision, detail))
    }

    /// Record a verdict durably; the first decision on a case wins unless
    /// the request is an amendment.
    pub fn post_decision(&self, id: &str, req: DecisionRequest) -> Result<(u64, DecisionRecord)> {
        let k = self.case(id)?;
        let coder = req
            .coder
            .clone()
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| ReviewError::BadRequest("coder id required".into()))?;
        if self.is_busy() {
            return Err(ReviewError::Busy);
        }
        let snap = self.snapshot();
        let case = &self.inputs.cases[k];
        let nodes = &self.inputs.nodes;
        let r = &snap.resolutions[k];
        let staged = match &req.verdict {
            Verdict::Accept => r.accepted_link(),
            Verdict::Override { choice } => {
                let v = nodes
                    .index_of(choice)
                    .filter(|v| case.candidates.contains(v))
                    .ok_or_else(|| ReviewError::BadRequest(format!("{choice} is not a candidate of case {id}")))?;
                Some((case.source, v))
            }
            Verdict::Reject | Verdict::Skip => None,
        }
        .map(|(a, b)| (nodes.pids[a].clone(), nodes.pids[b].clone()));

        let mut d = self.decisions.lock().expect("decision lock");
        if self.is_busy() {
            return Err(ReviewError::Busy);
        }
        if let Some(&prev) = d.latest.get(id) {
            if !req.amend {
                return Err(ReviewError::Conflict {
                    case_id: id.to_string(),
                    existing: Box::new(d.log[prev].clone()),
                });
            }
        }
        let record = DecisionRecord {
            seq: d.log.len() as u64 + 1,
            case_id: id.to_string(),
            verdict: req.verdict,
            coder,
            note: req.note,
            amend: req.amend,
            revision: snap.revision,
            timestamp_ms: now_ms(),
            suggestion: ResolutionRecord::new(r, nodes),
            staged,
        };
        let mut line = serde_json::to_string(&record).map_err(alterlink::Error::from)?;
        line.push('\n');
        let path = d.path.clone();
        d.file.write_all(line.as_bytes()).map_err(|e| io_err(&path, e))?;
        d.file.sync_data().map_err(|e| io_err(&path, e))?;
        let at = d.log.len();
        d.log.push(record.clone());
        d.latest.insert(id.to_string(), at);
        Ok((snap.revision, record))
    }

    /// Retrain with confirmed links added to the training graph, recalibrate
    /// τ and swap in the new suggestions.
    pub fn recompute(&self) -> Result<RecomputeReport> {
        if self.busy.swap(true, Ordering::SeqCst) {
            return Err(ReviewError::Busy);
        }
        let _guard = BusyGuard(&self.busy);
        let snap = self.snapshot();
        let staged = self.staged_links()?;
        let new_confirmed = staged.difference(&snap.confirmed).count();
        if new_confirmed == 0 {
            return Ok(RecomputeReport {
                revision: snap.revision,
                recomputed: false,
                message: format!("no newly confirmed links since revision {}", snap.revision),
                new_confirmed: 0,
                tau: snap.tau,
                changed_pending: 0,
            });
        }
        let n = self.inputs.nodes.len();
        let base = self.inputs.checkpoint.graph(n)?;
        let mut train: BTreeSet<(usize, usize)> = base.undirected_edges().into_iter().collect();
        train.extend(staged.iter().copied());
        let validation: Vec<(usize, usize)> = self
            .inputs
            .edges
            .pairs(ConfidenceFilter::ConfidentOnly)
            .into_iter()
            .filter(|p| !train.contains(p))
            .collect();
        let revision = snap.revision + 1;
        let stage_seed = seed::derive_seed(self.inputs.seed, &format!("revision-{revision}"));
        let split = EdgeSplit {
            train: train.iter().copied().collect(),
            validation,
            test: Vec::new(),
            seed: stage_seed,
        };
        let mut known = self.inputs.edges.pair_set(ConfidenceFilter::All);
        known.extend(staged.iter().copied());
        let graph = Graph::from_pairs(n, split.train.iter().copied());
        let cfg = TrainConfig {
            seed: stage_seed,
            ..self.inputs.resolve.train.clone()
        };
        let (model, _) = gat::train(snap.model.clone(), &self.inputs.features.values, &graph, &split, &known, &cfg)?;
        let z = model.embed(&self.inputs.features.values, &graph)?;
        let tau = calibrate_on_validation(&z, &split, &known, self.inputs.resolve.metric, stage_seed)?.tau;
        let n_staged = staged.len();
        let next = build_snapshot(&self.inputs, revision, model, graph, tau, staged)?;
        archive(&self.inputs, &self.state_dir, &next)?;

        let latest = self.latest_decisions();
        let changed_pending = self
            .inputs
            .cases
            .iter()
            .enumerate()
            .filter(|(k, c)| {
                !latest.contains_key(&c.id) && {
                    let (a, b) = (&snap.resolutions[*k], &next.resolutions[*k]);
                    a.decision != b.decision || a.margin != b.margin
                }
            })
            .count();
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok(RecomputeReport {
            revision,
            recomputed: true,
            message: format!("revision {revision} trained with {n_staged} confirmed links"),
            new_confirmed,
            tau,
            changed_pending,
        })
    }

    /// Final edge list: confident edges, then per case the human verdict or,
    /// failing that, the current model suggestion.
    pub fn export(&self) -> Result<ExportReport> {
        let snap = self.snapshot();
        let nodes = &self.inputs.nodes;
        let (latest, decisions) = {
            let d = self.decisions.lock().expect("decision lock");
            let latest: BTreeMap<String, DecisionRecord> =
                d.latest.iter().map(|(id, &k)| (id.clone(), d.log[k].clone())).collect();
            (latest, d.log.clone())
        };
        let mut links = Vec::new();
        let mut provenance: Vec<(String, Option<u64>, String)> = Vec::new();
        for (k, c) in self.inputs.cases.iter().enumerate() {
            match latest.get(&c.id).filter(|d| d.is_human_call()) {
                Some(d) => {
                    if let Some((s, t)) = &d.staged {
                        links.push((nodes.require(s)?, nodes.require(t)?));
                        provenance.push(("human".into(), Some(d.seq), c.id.clone()));
                    }
                }
                None => {
                    if let Some(l) = snap.resolutions[k].accepted_link() {
                        links.push(l);
                        provenance.push(("model".into(), None, c.id.clone()));
                    }
                }
            }
        }
        let table = assemble_edge_list(&self.inputs.edges, links.iter().copied())?;
        let n_confident = self.inputs.edges.count(Confidence::Confident);
        let mut origin_of: HashMap<(usize, usize), (String, Option<u64>, String)> = HashMap::new();
        for (&(a, b), p) in links.iter().zip(provenance) {
            origin_of.entry(pair(a, b)).or_insert(p);
        }
        let rows = table
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (origin, seq, case_id) = if k < n_confident {
                    ("confident".to_string(), None, None)
                } else {
                    let (o, s, c) = origin_of[&pair(e.src, e.dst)].clone();
                    (o, s, Some(c))
                };
                ExportRow {
                    src: nodes.pids[e.src].clone(),
                    dst: nodes.pids[e.dst].clone(),
                    origin,
                    case_id,
                    decision_seq: seq,
                }
            })
            .collect();
        Ok(ExportReport {
            revision: snap.revision,
            edges_csv: edges_to_csv(&table, nodes)?,
            rows,
            decisions,
        })
    }

    pub fn status(&self) -> Result<RevisionStatus> {
        let snap = self.snapshot();
        let latest = self.latest_decisions();
        let staged = self.staged_links()?;
        Ok(RevisionStatus {
            session_id: self.session_id(),
            revision: snap.revision,
            tau: snap.tau,
            pending: self.inputs.cases.len() - latest.len(),
            resolved: latest.len(),
            confirmed: staged.len(),
            unconfirmed_since_revision: staged.difference(&snap.confirmed).count(),
            busy: self.is_busy(),
        })
    }
}

fn latest_archive(state_dir: &Path) -> Result<Option<RevisionArchive>> {
    let dir = state_dir.join(REVISIONS_DIR);
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in std::fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
        let path = entry.map_err(|e| io_err(&dir, e))?.path();
        let rev = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("rev-"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(r) = rev {
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, path));
            }
        }
    }
    let Some((_, path)) = best else { return Ok(None) };
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    Ok(Some(serde_json::from_str(&text).map_err(alterlink::Error::from)?))
}

fn snapshot_from_archive(inputs: &SessionInputs, a: RevisionArchive) -> Result<Snapshot> {
    a.checkpoint.ensure_compatible(&inputs.features)?;
    let n = inputs.nodes.len();
    let graph = a.checkpoint.graph(n)?;
    let confirmed = a
        .confirmed
        .iter()
        .map(|(s, d)| Ok(pair(inputs.nodes.require(s)?, inputs.nodes.require(d)?)))
        .collect::<Result<BTreeSet<_>>>()?;
    build_snapshot(inputs, a.revision, a.checkpoint.model, graph, a.tau, confirmed)
}

fn build_snapshot(
    inputs: &SessionInputs,
    revision: u64,
    model: GatModel,
    graph: Graph,
    tau: f64,
    confirmed: BTreeSet<(usize, usize)>,
) -> Result<Snapshot> {
    let embeddings = model.embed(&inputs.features.values, &graph)?;
    let r = &inputs.resolve;
    let resolutions = inputs
        .cases
        .iter()
        .map(|c| resolve_case(c, &embeddings, Some(tau), r.metric, r.margin_epsilon))
        .collect::<alterlink::Result<Vec<_>>>()?;
    Ok(Snapshot {
        revision,
        model,
        graph,
        embeddings,
        tau,
        confirmed,
        resolutions,
        explanations: Mutex::new(HashMap::new()),
    })
}

fn archive(inputs: &SessionInputs, state_dir: &Path, snap: &Snapshot) -> Result<()> {
    let nodes = &inputs.nodes;
    let archive = RevisionArchive {
        revision: snap.revision,
        tau: snap.tau,
        confirmed: snap
            .confirmed
            .iter()
            .map(|&(a, b)| (nodes.pids[a].clone(), nodes.pids[b].clone()))
            .collect(),
        suggestions: snap.resolutions.iter().map(|r| ResolutionRecord::new(r, nodes)).collect(),
        checkpoint: Checkpoint::new(snap.model.clone(), &inputs.features, Some(snap.tau)).with_graph(&snap.graph),
    };
    let text = serde_json::to_string(&archive).map_err(alterlink::Error::from)?;
    write_atomic(&revision_path(state_dir, snap.revision), text.as_bytes())
}
