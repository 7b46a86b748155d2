use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Binary,
}

impl ColumnKind {
    pub fn parse(column: &str, s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "categorical" => Ok(ColumnKind::Categorical),
            "numeric" => Ok(ColumnKind::Numeric),
            "binary" => Ok(ColumnKind::Binary),
            other => Err(Error::UnknownKind {
                column: column.to_string(),
                kind: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
            ColumnKind::Binary => "binary",
        })
    }
}

/// One parsed cell. `Missing` marks an empty cell in the source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Missing,
    Category(String),
    Number(f64),
    Flag(bool),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    fn parse(column: &str, kind: ColumnKind, raw: &str) -> Result<Cell> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Ok(Cell::Missing);
        }
        let mismatch = || Error::KindMismatch {
            column: column.to_string(),
            value: raw.to_string(),
            kind: kind.to_string(),
        };
        match kind {
            ColumnKind::Categorical => Ok(Cell::Category(raw.to_string())),
            ColumnKind::Numeric => {
                let v: f64 = raw.parse().map_err(|_| mismatch())?;
                if v.is_finite() {
                    Ok(Cell::Number(v))
                } else {
                    Err(mismatch())
                }
            }
            ColumnKind::Binary => match raw.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => Ok(Cell::Flag(true)),
                "0" | "false" | "no" => Ok(Cell::Flag(false)),
                _ => Err(mismatch()),
            },
        }
    }

    /// Text form used when writing node files.
    pub fn render(&self) -> String {
        match self {
            Cell::Missing => String::new(),
            Cell::Category(s) => s.clone(),
            Cell::Number(v) => format!("{v}"),
            Cell::Flag(b) => if *b { "1" } else { "0" }.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub cells: Vec<Cell>,
}

impl Column {
    pub fn missing_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.is_missing()).count() as f64 / self.cells.len() as f64
    }
}

/// Schema sidecar: which column holds the PID and the kind of every other column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default = "default_pid_column")]
    pub pid_column: String,
    pub columns: BTreeMap<String, String>,
}

fn default_pid_column() -> String {
    "PID".to_string()
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn from_table(table: &NodeTable) -> Self {
        Schema {
            pid_column: table.pid_column.clone(),
            columns: table
                .columns
                .iter()
                .map(|c| (c.name.clone(), c.kind.to_string()))
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Survey attributes keyed by PID. Row `i` is internal node index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    pub pid_column: String,
    pub pids: Vec<String>,
    pub columns: Vec<Column>,
    index: HashMap<String, usize>,
}

impl NodeTable {
    pub fn new(pid_column: &str, pids: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pids.len());
        for (i, pid) in pids.iter().enumerate() {
            if index.insert(pid.clone(), i).is_some() {
                return Err(Error::DuplicatePid(pid.clone()));
            }
        }
        for c in &columns {
            if c.cells.len() != pids.len() {
                return Err(Error::DimensionMismatch {
                    expected: pids.len(),
                    got: c.cells.len(),
                });
            }
        }
        Ok(NodeTable {
            pid_column: pid_column.to_string(),
            pids,
            columns,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.pids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pids.is_empty()
    }

    pub fn index_of(&self, pid: &str) -> Option<usize> {
        self.index.get(pid).copied()
    }

    pub fn require(&self, pid: &str) -> Result<usize> {
        self.index_of(pid).ok_or_else(|| Error::UnknownPid(pid.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.cells.iter().filter(|x| x.is_missing()).count())
            .sum()
    }

    /// Row `i` rendered as (column, text) pairs, for case profiles.
    pub fn profile(&self, i: usize) -> Vec<(String, String)> {
        self.columns
            .iter()
            .map(|c| (c.name.clone(), c.cells[i].render()))
            .collect()
    }
}

/// Load a node file. Column kinds come from the schema sidecar when given,
/// otherwise from `name:kind` header annotations.
pub fn load_nodes(path: &Path, schema: Option<&Schema>) -> Result<NodeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();

    let mut names = Vec::with_capacity(headers.len());
    let mut kinds: Vec<Option<ColumnKind>> = Vec::with_capacity(headers.len());
    let pid_column = schema.map(|s| s.pid_column.as_str()).unwrap_or("PID");
    if !headers.iter().any(|h| h.split(':').next().unwrap_or("").trim() == pid_column) {
        return Err(Error::MissingColumn(pid_column.to_string()));
    }
    let mut pid_pos = None;
    for (pos, h) in headers.iter().enumerate() {
        let (name, annotated) = match h.split_once(':') {
            Some((n, k)) => (n.trim(), Some(k)),
            None => (h.trim(), None),
        };
        if name == pid_column {
            pid_pos = Some(pos);
            names.push(name.to_string());
            kinds.push(None);
            continue;
        }
        let kind = match (schema.and_then(|s| s.columns.get(name)), annotated) {
            (Some(k), _) => ColumnKind::parse(name, k)?,
            (None, Some(k)) => ColumnKind::parse(name, k)?,
            (None, None) => {
                return Err(Error::UnknownKind {
                    column: name.to_string(),
                    kind: String::new(),
                })
            }
        };
        names.push(name.to_string());
        kinds.push(Some(kind));
    }
    let pid_pos = pid_pos.ok_or_else(|| Error::MissingColumn(pid_column.to_string()))?;

    let mut pids = Vec::new();
    let mut cells: Vec<Vec<Cell>> = vec![Vec::new(); names.len()];
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let pid = record.get(pid_pos).unwrap_or("").trim().to_string();
        if pid.is_empty() {
            return Err(Error::MissingColumn(pid_column.to_string()));
        }
        if seen.insert(pid.clone(), ()).is_some() {
            return Err(Error::DuplicatePid(pid));
        }
        pids.push(pid);
        for (pos, kind) in kinds.iter().enumerate() {
            if let Some(kind) = kind {
                let raw = record.get(pos).unwrap_or("");
                cells[pos].push(Cell::parse(&names[pos], *kind, raw)?);
            }
        }
    }

    let columns = names
        .into_iter()
        .zip(kinds)
        .zip(cells)
        .filter_map(|((name, kind), cells)| kind.map(|kind| Column { name, kind, cells }))
        .collect();
    NodeTable::new(pid_column, pids, columns)
}

/// Write a node file with a plain header; kinds go to the schema sidecar.
pub fn write_nodes(path: &Path, table: &NodeTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec![table.pid_column.clone()];
    header.extend(table.columns.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (i, pid) in table.pids.iter().enumerate() {
        let mut row = vec![pid.clone()];
        row.extend(table.columns.iter().map(|c| c.cells[i].render()));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
