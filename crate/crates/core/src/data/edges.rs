use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{pair, NodeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Confident,
    Uncertain,
}

impl Confidence {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "confident" => Ok(Confidence::Confident),
            "uncertain" => Ok(Confidence::Uncertain),
            other => Err(Error::InvalidConfidence(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Confidence::Confident => "confident",
            Confidence::Uncertain => "uncertain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceFilter {
    ConfidentOnly,
    All,
}

impl ConfidenceFilter {
    pub fn admits(&self, c: Confidence) -> bool {
        match self {
            ConfidenceFilter::ConfidentOnly => c == Confidence::Confident,
            ConfidenceFilter::All => true,
        }
    }
}

/// A reported nomination, `src` naming `dst`. Endpoints are internal indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeTable {
    pub edges: Vec<Edge>,
}

impl EdgeTable {
    pub fn new(edges: Vec<Edge>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.src == e.dst {
                return Err(Error::SelfLoop(e.src.to_string()));
            }
            if !seen.insert(*e) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge row {} -> {} ({})",
                    e.src,
                    e.dst,
                    e.confidence.as_str()
                )));
            }
        }
        Ok(EdgeTable { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn count(&self, c: Confidence) -> usize {
        self.edges.iter().filter(|e| e.confidence == c).count()
    }

    /// Distinct unordered pairs admitted by the filter, sorted.
    pub fn pairs(&self, filter: ConfidenceFilter) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .filter(|e| filter.admits(e.confidence))
            .map(|e| pair(e.src, e.dst))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn pair_set(&self, filter: ConfidenceFilter) -> HashSet<(usize, usize)> {
        self.pairs(filter).into_iter().collect()
    }
}

pub fn load_edges(path: &Path, nodes: &NodeTable) -> Result<EdgeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (src_pos, dst_pos, conf_pos) = (col("src")?, col("dst")?, col("confidence")?);

    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let src_pid = record.get(src_pos).unwrap_or("").trim();
        let dst_pid = record.get(dst_pos).unwrap_or("").trim();
        if src_pid == dst_pid {
            return Err(Error::SelfLoop(src_pid.to_string()));
        }
        edges.push(Edge {
            src: nodes.require(src_pid)?,
            dst: nodes.require(dst_pid)?,
            confidence: Confidence::parse(record.get(conf_pos).unwrap_or(""))?,
        });
    }
    EdgeTable::new(edges)
}

pub fn write_edges(path: &Path, edges: &EdgeTable, nodes: &NodeTable) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_edges_to(file, edges, nodes).map_err(|e| match e {
        Error::Csv { source, .. } => Error::csv(path, source),
        other => other,
    })
}

/// Edge rows as CSV text, in the same layout as [`write_edges`].
pub fn edges_to_csv(edges: &EdgeTable, nodes: &NodeTable) -> Result<String> {
    let mut buf = Vec::new();
    write_edges_to(&mut buf, edges, nodes)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn write_edges_to<W: std::io::Write>(out: W, edges: &EdgeTable, nodes: &NodeTable) -> Result<()> {
    let here = Path::new("<edges>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst", "confidence"]).map_err(|e| Error::csv(here, e))?;
    for e in &edges.edges {
        w.write_record([
            nodes.pids[e.src].as_str(),
            nodes.pids[e.dst].as_str(),
            e.confidence.as_str(),
        ])
        .map_err(|e| Error::csv(here, e))?;
    }
    w.flush().map_err(|e| Error::io(here, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_nodes;

    fn setup(edges: &str) -> (tempfile::TempDir, NodeTable, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let np = dir.path().join("n.csv");
        std::fs::write(&np, "PID,Age:numeric\na,1\nb,2\nc,3\n").unwrap();
        let nodes = load_nodes(&np, None).unwrap();
        let ep = dir.path().join("e.csv");
        std::fs::write(&ep, edges).unwrap();
        (dir, nodes, ep)
    }

    #[test]
    fn empty_edge_file() {
        let (_d, nodes, ep) = setup("src,dst,confidence\n");
        assert!(load_edges(&ep, &nodes).unwrap().is_empty());
    }

    #[test]
    fn unknown_endpoint_and_self_loop() {
        let (_d, nodes, ep) = setup("src,dst,confidence\na,z,confident\n");
        assert!(matches!(load_edges(&ep, &nodes), Err(Error::UnknownPid(p)) if p == "z"));
        let (_d, nodes, ep) = setup("src,dst,confidence\nb,b,uncertain\n");
        assert!(matches!(load_edges(&ep, &nodes), Err(Error::SelfLoop(_))));
        let (_d, nodes, ep) = setup("src,dst,confidence\na,b,maybe\n");
        assert!(matches!(load_edges(&ep, &nodes), Err(Error::InvalidConfidence(_))));
    }

    #[test]
    fn counts_and_roundtrip() {
        let (d, nodes, ep) =
            setup("src,dst,confidence\na,b,confident\nb,a,confident\nc,a,uncertain\n");
        let t = load_edges(&ep, &nodes).unwrap();
        assert_eq!(t.count(Confidence::Confident), 2);
        assert_eq!(t.pairs(ConfidenceFilter::ConfidentOnly), vec![(0, 1)]);
        assert_eq!(t.pairs(ConfidenceFilter::All), vec![(0, 1), (0, 2)]);
        let out = d.path().join("o.csv");
        write_edges(&out, &t, &nodes).unwrap();
        assert_eq!(load_edges(&out, &nodes).unwrap(), t);
    }
}
