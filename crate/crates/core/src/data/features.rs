use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Cell, ColumnKind, NodeTable};
use crate::error::{Error, Result};

/// How one output column was derived from a source attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case")]
pub enum ColumnTransform {
    /// Indicator of `category`; `None` is the missing-value ("unknown") column.
    OneHot { category: Option<String> },
    /// z-score with the population moments of the non-missing values;
    /// missing cells map to 0 (the mean).
    ZScore { mean: f64, std: f64 },
    /// 1 for true, 0 for false or missing.
    Flag,
    /// 1 when the binary source is missing.
    FlagMissing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub source: String,
    #[serde(flatten)]
    pub transform: ColumnTransform,
}

impl FeatureColumn {
    pub fn name(&self) -> String {
        match &self.transform {
            ColumnTransform::OneHot { category: Some(c) } => format!("{}={}", self.source, c),
            ColumnTransform::OneHot { category: None } => format!("{}=<unknown>", self.source),
            ColumnTransform::FlagMissing => format!("{}=<unknown>", self.source),
            ColumnTransform::ZScore { .. } | ColumnTransform::Flag => self.source.clone(),
        }
    }

    fn encode(&self, cell: &Cell) -> f64 {
        match (&self.transform, cell) {
            (ColumnTransform::OneHot { category: None }, Cell::Missing) => 1.0,
            (ColumnTransform::OneHot { category: Some(c) }, Cell::Category(v)) if c == v => 1.0,
            (ColumnTransform::OneHot { .. }, _) => 0.0,
            (ColumnTransform::ZScore { mean, std }, Cell::Number(v)) => (v - mean) / std,
            (ColumnTransform::ZScore { .. }, _) => 0.0,
            (ColumnTransform::Flag, Cell::Flag(true)) => 1.0,
            (ColumnTransform::Flag, _) => 0.0,
            (ColumnTransform::FlagMissing, Cell::Missing) => 1.0,
            (ColumnTransform::FlagMissing, _) => 0.0,
        }
    }
}

/// Dense numeric encoding of a node table, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub columns: Vec<FeatureColumn>,
}

impl FeatureMatrix {
    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(FeatureColumn::name).collect()
    }

    /// Re-apply the recorded transforms to a node table.
    pub fn apply(&self, nodes: &NodeTable) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((nodes.len(), self.columns.len()));
        for (k, fc) in self.columns.iter().enumerate() {
            let col = nodes
                .column(&fc.source)
                .ok_or_else(|| Error::MissingColumn(fc.source.clone()))?;
            for (i, cell) in col.cells.iter().enumerate() {
                out[[i, k]] = fc.encode(cell);
            }
        }
        Ok(out)
    }

    /// Hex SHA-256 of the serialized column map. Checkpoints record it so a
    /// model is never applied to features encoded differently.
    pub fn column_map_hash(&self) -> String {
        column_map_hash(&self.columns)
    }

    /// Keep only the listed columns, in the given order.
    pub fn select(&self, keep: &[usize]) -> FeatureMatrix {
        let values = self.values.select(ndarray::Axis(1), keep);
        let columns = keep.iter().map(|&k| self.columns[k].clone()).collect();
        FeatureMatrix { values, columns }
    }
}

pub fn column_map_hash(columns: &[FeatureColumn]) -> String {
    let bytes = serde_json::to_vec(columns).expect("column map serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn preprocess(nodes: &NodeTable, missing_threshold: f64) -> Result<FeatureMatrix> {
    preprocess_excluding(nodes, missing_threshold, &[])
}

/// Drop columns whose missing fraction exceeds `missing_threshold`, one-hot
/// categoricals (missing gets its own column), z-score numerics with mean
/// imputation, and encode binaries as 0/1. Columns named in `exclude` are
/// never encoded.
pub fn preprocess_excluding(
    nodes: &NodeTable,
    missing_threshold: f64,
    exclude: &[&str],
) -> Result<FeatureMatrix> {
    if !(missing_threshold > 0.0 && missing_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "missing_threshold must be in (0, 1], got {missing_threshold}"
        )));
    }
    let mut columns = Vec::new();
    for col in &nodes.columns {
        if exclude.contains(&col.name.as_str()) || col.missing_fraction() > missing_threshold {
            continue;
        }
        let any_missing = col.cells.iter().any(Cell::is_missing);
        let source = col.name.clone();
        match col.kind {
            ColumnKind::Categorical => {
                let cats: BTreeSet<&str> = col
                    .cells
                    .iter()
                    .filter_map(|c| match c {
                        Cell::Category(s) => Some(s.as_str()),
                        _ => None,
                    })
                    .collect();
                for c in cats {
                    columns.push(FeatureColumn {
                        source: source.clone(),
                        transform: ColumnTransform::OneHot {
                            category: Some(c.to_string()),
                        },
                    });
                }
                if any_missing {
                    columns.push(FeatureColumn {
                        source,
                        transform: ColumnTransform::OneHot { category: None },
                    });
                }
            }
            ColumnKind::Numeric => {
                let vals: Vec<f64> = col
                    .cells
                    .iter()
                    .filter_map(|c| match c {
                        Cell::Number(v) => Some(*v),
                        _ => None,
                    })
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                let std = var.sqrt();
                // constant column carries no information
                if std <= 1e-12 * mean.abs().max(1.0) {
                    continue;
                }
                columns.push(FeatureColumn {
                    source,
                    transform: ColumnTransform::ZScore { mean, std },
                });
            }
            ColumnKind::Binary => {
                columns.push(FeatureColumn {
                    source: source.clone(),
                    transform: ColumnTransform::Flag,
                });
                if any_missing {
                    columns.push(FeatureColumn {
                        source,
                        transform: ColumnTransform::FlagMissing,
                    });
                }
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::NoUsableFeatures);
    }
    let mut fm = FeatureMatrix {
        values: Array2::zeros((0, 0)),
        columns,
    };
    fm.values = fm.apply(nodes)?;
    Ok(fm)
}
