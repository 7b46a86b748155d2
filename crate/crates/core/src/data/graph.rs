use std::collections::BTreeSet;

use super::{pair, ConfidenceFilter, EdgeTable};

/// Symmetrized adjacency in CSR form. Every node carries a self-loop and
/// neighbor lists are sorted, so `N(i)` always contains `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    /// Directed rows as reported, kept for reporting only.
    pub directed_edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Build from directed or undirected pairs; direction is dropped.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut directed = Vec::new();
        let mut adj: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for (a, b) in pairs {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for n={n}");
            directed.push((a, b));
            adj[a].insert(b);
            adj[b].insert(a);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for set in adj {
            targets.extend(set);
            offsets.push(targets.len());
        }
        Graph {
            n,
            offsets,
            targets,
            directed_edges: directed,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Start of node `i`'s slice in the flat entry list.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Number of (i, j) adjacency entries including self-loops.
    pub fn n_entries(&self) -> usize {
        self.targets.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len() - 1
    }

    /// Distinct undirected non-loop edges `(a, b)` with `a < b`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// For each adjacency entry, the index into `undirected_edges()`, or
    /// `None` for self-loops.
    pub fn entry_edge_ids(&self) -> Vec<Option<usize>> {
        let edges = self.undirected_edges();
        let mut ids = Vec::with_capacity(self.n_entries());
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                ids.push(if i == j {
                    None
                } else {
                    edges.binary_search(&pair(i, j)).ok()
                });
            }
        }
        ids
    }

    /// Nodes within `hops` of any seed, sorted.
    pub fn k_hop(&self, seeds: &[usize], hops: usize) -> Vec<usize> {
        let mut seen: BTreeSet<usize> = seeds.iter().copied().collect();
        let mut frontier: Vec<usize> = seen.iter().copied().collect();
        for _ in 0..hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in self.neighbors(u) {
                    if seen.insert(v) {
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    /// Induced subgraph on sorted `nodes`, which become indices `0..nodes.len()`.
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let local = |g: usize| nodes.binary_search(&g).ok();
        let mut pairs = Vec::new();
        for (li, &gi) in nodes.iter().enumerate() {
            for &gj in self.neighbors(gi) {
                if gi < gj {
                    if let Some(lj) = local(gj) {
                        pairs.push((li, lj));
                    }
                }
            }
        }
        Graph::from_pairs(nodes.len(), pairs)
    }

    /// Apply a node relabeling `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let pairs: Vec<_> = self
            .undirected_edges()
            .into_iter()
            .map(|(a, b)| (perm[a], perm[b]))
            .collect();
        Graph::from_pairs(self.n, pairs)
    }
}

pub fn build_graph(edges: &EdgeTable, n: usize, include: ConfidenceFilter) -> Graph {
    let mut g = Graph::from_pairs(n, edges.pairs(include));
    g.directed_edges = edges
        .edges
        .iter()
        .filter(|e| include.admits(e.confidence))
        .map(|e| (e.src, e.dst))
        .collect();
    g
}
