//! Python bindings: the GAT model and checkpoints, distance-based case
//! resolution, metrics, explanations and the config-driven pipeline.

use std::path::PathBuf;

use alterlink_cli::{Command, RunConfig};
use alterlink_core::data::{ColumnTransform, FeatureColumn, FeatureMatrix, Graph};
use alterlink_core::disambig::{self, AmbiguityCase, CaseKind, Decision, DistanceMetric, Provenance};
use alterlink_core::explain::{self, ExplainConfig};
use alterlink_core::gat::{self, Architecture, Embeddings};
use alterlink_core::metrics::{self, ConfusionCounts};
use ndarray::Array2;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(alterlink, AlterlinkError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    AlterlinkError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn graph(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Graph> {
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(PyValueError::new_err(format!("edge ({a}, {b}) out of range for {n} nodes")));
    }
    Ok(Graph::from_pairs(n, edges))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn metric(name: &str) -> PyResult<DistanceMetric> {
    match name {
        "euclidean" => Ok(DistanceMetric::Euclidean),
        "cosine" => Ok(DistanceMetric::Cosine),
        other => Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
    }
}

/// Graph attention network producing node embeddings.
#[pyclass(module = "alterlink", skip_from_py_object)]
#[derive(Clone)]
struct GatModel {
    inner: gat::GatModel,
}

#[pymethods]
impl GatModel {
    #[new]
    #[pyo3(signature = (in_dim, hidden_channels=16, heads=8, layers=3, out_channels=7, slope=0.2, seed=0))]
    fn new(
        in_dim: usize,
        hidden_channels: usize,
        heads: usize,
        layers: usize,
        out_channels: usize,
        slope: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let arch = Architecture {
            hidden_channels,
            heads,
            layers,
            out_channels,
            slope,
        };
        Ok(GatModel {
            inner: gat::GatModel::init(in_dim, &arch, seed).map_err(err)?,
        })
    }

    /// Output width of each layer.
    #[getter]
    fn widths(&self) -> Vec<usize> {
        self.inner.widths()
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn param_hash(&self) -> String {
        self.inner.param_hash()
    }

    /// Embeddings for `features` (one row per node) over undirected `edges`.
    fn embed(&self, features: Vec<Vec<f64>>, edges: Vec<(usize, usize)>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(features)?;
        let g = graph(x.nrows(), edges)?;
        Ok(rows(&self.inner.embed(&x, &g).map_err(err)?.0))
    }

    /// Largest relative error between analytic and finite-difference gradients.
    #[pyo3(signature = (features, edges, pairs, labels, delta=1e-6))]
    fn grad_check(
        &self,
        features: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        pairs: Vec<(usize, usize)>,
        labels: Vec<f64>,
        delta: f64,
    ) -> PyResult<f64> {
        let x = matrix(features)?;
        let g = graph(x.nrows(), edges)?;
        let r = gat::grad_check(&self.inner, &x, &g, &pairs, &labels, delta, f64::INFINITY).map_err(err)?;
        Ok(r.max_relative_error)
    }

    fn __repr__(&self) -> String {
        format!("GatModel(widths={:?})", self.inner.widths())
    }
}

/// A trained model with its calibrated threshold and training graph.
#[pyclass(module = "alterlink")]
struct Checkpoint {
    inner: gat::Checkpoint,
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Checkpoint {
            inner: gat::Checkpoint::load(&path).map_err(err)?,
        })
    }

    #[getter]
    fn threshold(&self) -> Option<f64> {
        self.inner.threshold
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes
    }

    #[getter]
    fn graph_edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph_edges.clone()
    }

    #[getter]
    fn model(&self) -> GatModel {
        GatModel {
            inner: self.inner.model.clone(),
        }
    }

    /// Embeddings over the graph stored with the checkpoint.
    fn embed(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(features)?;
        let g = self.inner.graph(x.nrows()).map_err(err)?;
        Ok(rows(&self.inner.model.embed(&x, &g).map_err(err)?.0))
    }
}

/// Distance cutoff maximizing F1 of `distance < tau`; returns `(tau, f1)`.
#[pyfunction]
fn calibrate_threshold(distances: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64)> {
    let t = disambig::calibrate_threshold(&distances, &labels).map_err(err)?;
    Ok((t.tau, t.f1))
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    metrics::auc(&scores, &labels).map_err(err)
}

/// Precision, recall, F1 and accuracy of boolean predictions.
#[pyfunction]
fn classification_metrics<'py>(py: Python<'py>, predictions: Vec<bool>, labels: Vec<bool>) -> PyResult<Bound<'py, PyDict>> {
    let m = ConfusionCounts::from_predictions(&predictions, &labels).map_err(err)?.metrics();
    let d = PyDict::new(py);
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    d.set_item("accuracy", m.accuracy)?;
    Ok(d)
}

#[allow(clippy::too_many_arguments)]
fn resolve<'py>(
    py: Python<'py>,
    embeddings: Vec<Vec<f64>>,
    kind: CaseKind,
    source: usize,
    candidates: Vec<usize>,
    tau: Option<f64>,
    metric_name: &str,
    margin_epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let z = Embeddings(matrix(embeddings)?);
    if let Some(&bad) = candidates.iter().chain([&source]).find(|&&i| i >= z.n()) {
        return Err(PyValueError::new_err(format!("node {bad} out of range for {} embeddings", z.n())));
    }
    let case = AmbiguityCase {
        id: "case".into(),
        kind,
        source,
        candidates,
        truth: None,
        provenance: Provenance::Real,
    };
    let r = disambig::resolve_case(&case, &z, tau, metric(metric_name)?, margin_epsilon).map_err(err)?;
    let d = PyDict::new(py);
    match r.decision {
        Decision::Chosen(v) => d.set_item("chosen", v)?,
        Decision::Exists(b) => d.set_item("exists", b)?,
    }
    d.set_item("distances", r.distances)?;
    d.set_item("margin", r.margin)?;
    d.set_item("low_confidence", r.low_confidence)?;
    Ok(d)
}

/// Pick the candidate nearer to `source` in embedding space.
#[pyfunction]
#[pyo3(signature = (embeddings, source, a, b, metric="euclidean", margin_epsilon=disambig::DEFAULT_MARGIN_EPSILON))]
fn resolve_pair<'py>(
    py: Python<'py>,
    embeddings: Vec<Vec<f64>>,
    source: usize,
    a: usize,
    b: usize,
    metric: &str,
    margin_epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    resolve(py, embeddings, CaseKind::Pair, source, vec![a, b], None, metric, margin_epsilon)
}

/// Decide whether `source`–`target` is a link: distance below `tau`.
#[pyfunction]
#[pyo3(signature = (embeddings, source, target, tau, metric="euclidean", margin_epsilon=disambig::DEFAULT_MARGIN_EPSILON))]
fn resolve_existence<'py>(
    py: Python<'py>,
    embeddings: Vec<Vec<f64>>,
    source: usize,
    target: usize,
    tau: f64,
    metric: &str,
    margin_epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    resolve(py, embeddings, CaseKind::Existence, source, vec![target], Some(tau), metric, margin_epsilon)
}

/// Edge and feature masks explaining the model's score for `(u, v)`.
#[pyfunction]
#[pyo3(signature = (model, features, edges, u, v, feature_names=None, epochs=100, lr=0.01))]
#[allow(clippy::too_many_arguments)]
fn explain_link<'py>(
    py: Python<'py>,
    model: &GatModel,
    features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    u: usize,
    v: usize,
    feature_names: Option<Vec<String>>,
    epochs: usize,
    lr: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let x = matrix(features)?;
    let g = graph(x.nrows(), edges)?;
    let names = feature_names.unwrap_or_else(|| (0..x.ncols()).map(|k| format!("x{k}")).collect());
    if names.len() != x.ncols() {
        return Err(PyValueError::new_err("one feature name per column"));
    }
    let columns = names
        .into_iter()
        .map(|source| FeatureColumn {
            source,
            transform: ColumnTransform::ZScore { mean: 0.0, std: 1.0 },
        })
        .collect();
    let cfg = ExplainConfig {
        epochs,
        lr,
        ..ExplainConfig::default()
    };
    let fm = FeatureMatrix { values: x, columns };
    let e = explain::explain_link(&model.inner, &fm, &g, u, v, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("score", e.score)?;
    d.set_item("predicted", e.predicted)?;
    d.set_item("fidelity", e.fidelity)?;
    d.set_item("converged", e.converged)?;
    d.set_item("edge_mask", e.edge_mask)?;
    d.set_item("feature_mask", e.feature_mask)?;
    d.set_item(
        "top_features",
        e.top_features.iter().map(|f| (f.attribute.clone(), f.weight)).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Run a pipeline step (`synth`, `train`, `resolve`, `simulate`, `risk`,
/// `explain`) from a TOML config. Returns the summary and written files.
#[pyfunction]
#[pyo3(signature = (command, config=None, out=None, seed=None))]
fn run(
    py: Python<'_>,
    command: &str,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> PyResult<(String, Vec<PathBuf>)> {
    let cmd = match command {
        "synth" => Command::Synth,
        "train" => Command::Train,
        "resolve" => Command::Resolve,
        "simulate" => Command::Simulate,
        "risk" => Command::Risk,
        "explain" => Command::Explain,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p).map_err(|e| err(e.line()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.paths.out = std::path::absolute(&o).unwrap_or(o);
    }
    let result = py.detach(|| alterlink_cli::run(cmd, &cfg));
    let o = result.map_err(|e| err(e.line()))?;
    Ok((o.summary, o.files))
}

#[pymodule]
fn alterlink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AlterlinkError", m.py().get_type::<AlterlinkError>())?;
    m.add_class::<GatModel>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(calibrate_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(classification_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_pair, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_existence, m)?)?;
    m.add_function(wrap_pyfunction!(explain_link, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
