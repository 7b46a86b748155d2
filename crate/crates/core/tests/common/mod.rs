#![allow(dead_code)]

use alterlink::data::{pair, Graph};
use alterlink::gat::{Architecture, GatModel};
use alterlink::seed;
use ndarray::Array2;
use rand::Rng;

pub struct Instance {
    pub features: Array2<f64>,
    pub graph: Graph,
    pub model: GatModel,
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<f64>,
}

pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random_bool(p) {
                pairs.push((a, b));
            }
        }
    }
    Graph::from_pairs(n, pairs)
}

/// Small random graph, features, model and a labeled pair batch.
pub fn random_instance(s: u64, arch: &Architecture, max_nodes: usize) -> Instance {
    let mut rng = seed::rng(s);
    let n = rng.random_range(4..=max_nodes);
    let f = rng.random_range(2..6);
    let graph = random_graph(n, 0.3, &mut rng);
    let features = Array2::from_shape_simple_fn((n, f), || rng.random_range(-1.0..1.0));
    let model = GatModel::init(f, arch, s ^ 0x5eed).unwrap();
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..8 {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n);
        if a == b {
            b = (a + 1) % n;
        }
        labels.push(if graph.has_edge(a, b) { 1.0 } else { 0.0 });
        pairs.push(pair(a, b));
    }
    Instance {
        features,
        graph,
        model,
        pairs,
        labels,
    }
}

pub fn small_arch<R: Rng>(rng: &mut R) -> Architecture {
    Architecture {
        hidden_channels: rng.random_range(2..5),
        heads: rng.random_range(1..4),
        layers: rng.random_range(1..4),
        out_channels: rng.random_range(2..5),
        ..Architecture::default()
    }
}
