//! Survey tables, feature preprocessing, graph construction and edge splits.

mod edges;
mod features;
mod graph;
mod nodes;
mod sampling;
mod split;

pub use edges::{edges_to_csv, load_edges, write_edges, Confidence, ConfidenceFilter, Edge, EdgeTable};
pub use features::{preprocess, preprocess_excluding, ColumnTransform, FeatureColumn, FeatureMatrix};
pub use graph::{build_graph, Graph};
pub use nodes::{load_nodes, write_nodes, Cell, Column, ColumnKind, NodeTable, Schema};
pub use sampling::sample_non_edges;
pub use split::{split_edges, EdgeSplit};

/// Canonical unordered node pair with `a < b`.
pub fn pair(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
