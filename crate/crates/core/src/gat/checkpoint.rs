//! Versioned JSON checkpoints bound to the feature encoding they were trained on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::GatModel;
use crate::data::{FeatureMatrix, Graph};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "alterlink-gat";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub column_map_hash: String,
    /// Distance cutoff calibrated on validation links, when available.
    pub threshold: Option<f64>,
    /// Message-passing graph the model was trained on, as undirected index pairs.
    #[serde(default)]
    pub n_nodes: usize,
    #[serde(default)]
    pub graph_edges: Vec<(usize, usize)>,
    pub model: GatModel,
}

impl Checkpoint {
    pub fn new(model: GatModel, features: &FeatureMatrix, threshold: Option<f64>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            column_map_hash: features.column_map_hash(),
            threshold,
            n_nodes: features.n_nodes(),
            graph_edges: Vec::new(),
            model,
        }
    }

    pub fn with_graph(mut self, graph: &Graph) -> Self {
        self.n_nodes = graph.n();
        self.graph_edges = graph.undirected_edges();
        self
    }

    /// Training graph over `n` nodes; errors if the checkpoint was built for another node count.
    pub fn graph(&self, n: usize) -> Result<Graph> {
        if n != self.n_nodes {
            return Err(Error::Checkpoint(format!("checkpoint covers {} nodes, data has {n}", self.n_nodes)));
        }
        if let Some(&(a, b)) = self.graph_edges.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(Error::Checkpoint(format!("graph edge ({a}, {b}) outside {n} nodes")));
        }
        Ok(Graph::from_pairs(n, self.graph_edges.iter().copied()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.model.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    /// Refuse features encoded with a different column map.
    pub fn ensure_compatible(&self, features: &FeatureMatrix) -> Result<()> {
        let got = features.column_map_hash();
        if got != self.column_map_hash {
            return Err(Error::HashMismatch {
                expected: self.column_map_hash.clone(),
                got,
            });
        }
        Ok(())
    }
}
