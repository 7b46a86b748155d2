//! TOML run configuration. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use alterlink::disambig::{DistanceMetric, DEFAULT_MARGIN_EPSILON};
use alterlink::explain::ExplainConfig;
use alterlink::gat::{Architecture, TrainConfig};
use alterlink::risk::RiskConfig;
use alterlink::simulate::{BenchmarkConfig, ResolveConfig};
use alterlink::synth::{DatasetFiles, SynthConfig, INDICATOR_COLUMNS};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub nodes: PathBuf,
    pub schema: PathBuf,
    pub edges: PathBuf,
    /// Ambiguity cases; uncertain edges not covered here become existence cases.
    pub cases: Option<PathBuf>,
    /// Cases with ground truth, for accuracy reporting.
    pub truth: Option<PathBuf>,
    /// Uncorrected edge list for the risk comparison.
    pub original_edges: Option<PathBuf>,
    /// Defaults to `<out>/edges_resolved.csv`.
    pub resolved_edges: Option<PathBuf>,
    /// Defaults to `<out>/checkpoint.json`.
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            nodes: DatasetFiles::NODES.into(),
            schema: DatasetFiles::SCHEMA.into(),
            edges: DatasetFiles::EDGES.into(),
            cases: None,
            truth: None,
            original_edges: None,
            resolved_edges: None,
            checkpoint: None,
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Preprocess {
    pub missing_threshold: f64,
    /// Columns never used as disambiguation features; `prefix*` matches by prefix.
    pub exclude: Vec<String>,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            missing_threshold: 0.5,
            exclude: Vec::new(),
        }
    }
}

impl Preprocess {
    pub fn matches(&self, column: &str) -> bool {
        self.exclude.iter().any(|p| match p.strip_suffix('*') {
            Some(prefix) => column.starts_with(prefix),
            None => column == p,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Disambiguation {
    pub train_fraction: f64,
    pub metric: DistanceMetric,
    pub margin_epsilon: f64,
}

impl Default for Disambiguation {
    fn default() -> Self {
        Disambiguation {
            train_fraction: ResolveConfig::default().train_fraction,
            metric: DistanceMetric::Euclidean,
            margin_epsilon: DEFAULT_MARGIN_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiments {
    /// Seeds `seed, seed+1, ...` for simulate and risk.
    pub seeds: u64,
    /// Target columns summed into the risk score; excluded from risk predictors.
    pub risk_indicators: Vec<String>,
    /// Explain at most this many cases, in case order.
    pub explain_cases: Option<usize>,
}

impl Default for Experiments {
    fn default() -> Self {
        Experiments {
            seeds: 10,
            risk_indicators: INDICATOR_COLUMNS.iter().map(|s| s.to_string()).collect(),
            explain_cases: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Serve {
    pub addr: String,
    /// Defaults to `<out>/review`.
    pub state_dir: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    /// Attributes shown on candidate profiles; empty shows all.
    pub profile_columns: Vec<String>,
}

impl Default for Serve {
    fn default() -> Self {
        Serve {
            addr: "127.0.0.1:8080".into(),
            state_dir: None,
            ui_dir: None,
            profile_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub preprocess: Preprocess,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub disambiguation: Disambiguation,
    pub benchmark: BenchmarkConfig,
    pub experiments: Experiments,
    pub risk: RiskConfig,
    pub explain: ExplainConfig,
    pub synth: SynthConfig,
    pub serve: Serve,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let resolve = ResolveConfig::default();
        RunConfig {
            seed: 0,
            paths: Paths::default(),
            preprocess: Preprocess::default(),
            architecture: resolve.architecture,
            train: resolve.train,
            disambiguation: Disambiguation::default(),
            benchmark: BenchmarkConfig::default(),
            experiments: Experiments::default(),
            risk: RiskConfig::default(),
            explain: ExplainConfig::default(),
            synth: SynthConfig::default(),
            serve: Serve::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Core(alterlink::Error::io(path, e)))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&text, &base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve_path(&self.paths.out)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        match &self.paths.checkpoint {
            Some(p) => self.resolve_path(p),
            None => self.out_dir().join("checkpoint.json"),
        }
    }

    pub fn resolved_edges_path(&self) -> PathBuf {
        match &self.paths.resolved_edges {
            Some(p) => self.resolve_path(p),
            None => self.out_dir().join("edges_resolved.csv"),
        }
    }

    pub fn resolve_config(&self) -> ResolveConfig {
        ResolveConfig {
            train_fraction: self.disambiguation.train_fraction,
            architecture: self.architecture.clone(),
            train: self.train.clone(),
            metric: self.disambiguation.metric,
            margin_epsilon: self.disambiguation.margin_epsilon,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.experiments.seeds).map(|k| self.seed + k).collect()
    }
}

/// Config written next to a synthesized dataset.
#[derive(Debug, Serialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub paths: Paths,
    pub preprocess: Preprocess,
}
