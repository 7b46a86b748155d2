#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use alterlink::data::preprocess_excluding;
use alterlink::disambig::AmbiguityCase;
use alterlink::explain::ExplainConfig;
use alterlink::gat::{Checkpoint, TrainConfig};
use alterlink::simulate::{fit_model, ResolveConfig};
use alterlink::synth::{generate, non_disambiguation_columns, SynthConfig, SynthDataset};
use alterlink_review::{Session, SessionInputs};

pub struct Fixture {
    pub data: SynthDataset,
    pub inputs: SessionInputs,
}

pub fn resolve_config() -> ResolveConfig {
    ResolveConfig {
        train: TrainConfig {
            epochs: 30,
            patience: 30,
            ..ResolveConfig::default().train
        },
        ..ResolveConfig::default()
    }
}

fn build() -> Fixture {
    let data = generate(&SynthConfig {
        seed: 3,
        pair_cases: 12,
        existence_true: 20,
        out_of_network: 10,
        ..SynthConfig::default()
    })
    .unwrap();
    let excluded = non_disambiguation_columns(&data.nodes);
    let excluded: Vec<&str> = excluded.iter().map(String::as_str).collect();
    let features = preprocess_excluding(&data.nodes, 0.5, &excluded).unwrap();
    let resolve = resolve_config();
    let fitted = fit_model(&features.values, &data.edges, &resolve, 11).unwrap();
    let checkpoint = Checkpoint::new(fitted.model.clone(), &features, Some(fitted.threshold.tau)).with_graph(&fitted.graph);
    let cases: Vec<AmbiguityCase> = data
        .cases
        .iter()
        .map(|c| AmbiguityCase { truth: None, ..c.clone() })
        .collect();
    let inputs = SessionInputs {
        nodes: data.nodes.clone(),
        features,
        edges: data.edges.clone(),
        cases,
        checkpoint,
        resolve,
        explain: ExplainConfig {
            epochs: 30,
            ..ExplainConfig::default()
        },
        profile_columns: vec!["Gender".into(), "Rank".into(), "MOS".into()],
        seed: 11,
    };
    Fixture { data, inputs }
}

/// Trained once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(build)
}

pub fn open(dir: &Path) -> Session {
    Session::open(fixture().inputs.clone(), dir).unwrap()
}
