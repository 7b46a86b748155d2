//! Central finite-difference verification of analytic gradients.

use ndarray::Array2;
use serde::Serialize;

use super::loss::link_loss_grad;
use super::model::GatModel;
use crate::data::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter with the largest relative error.
    pub worst_parameter: String,
    pub worst_index: usize,
    pub n_params: usize,
    pub passed: bool,
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central differences of `f` at `params`, one coordinate at a time.
pub fn numeric_gradient(
    params: &[f64],
    delta: f64,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be > 0, got {delta}")));
    }
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + delta;
        let plus = f(&p)?;
        p[k] = orig - delta;
        let minus = f(&p)?;
        p[k] = orig;
        out.push((plus - minus) / (2.0 * delta));
    }
    Ok(out)
}

/// Compare two gradient vectors; `name` labels the worst coordinate.
pub fn compare(
    analytic: &[f64],
    numeric: &[f64],
    tolerance: f64,
    name: impl Fn(usize) -> String,
) -> GradCheckReport {
    let mut worst = (0usize, 0.0f64);
    for (k, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let r = relative_error(a, n);
        if r > worst.1 || r.is_nan() {
            worst = (k, r);
        }
    }
    GradCheckReport {
        max_relative_error: worst.1,
        worst_parameter: name(worst.0),
        worst_index: worst.0,
        n_params: analytic.len(),
        passed: worst.1 < tolerance,
    }
}

/// Link-prediction loss of `model` at flat parameters `flat`.
pub fn link_loss_at(
    model: &GatModel,
    flat: &[f64],
    features: &Array2<f64>,
    graph: &Graph,
    pairs: &[(usize, usize)],
    labels: &[f64],
) -> Result<f64> {
    let mut m = model.clone();
    m.set_flat(flat);
    let z = m.embed(features, graph)?;
    Ok(link_loss_grad(&z.0, pairs, labels)?.0)
}

/// Analytic link-loss gradient, flattened.
pub fn link_loss_gradient(
    model: &GatModel,
    features: &Array2<f64>,
    graph: &Graph,
    pairs: &[(usize, usize)],
    labels: &[f64],
) -> Result<Vec<f64>> {
    let state = model.forward_weighted(features, graph, None)?;
    let (_, dz) = link_loss_grad(state.output(), pairs, labels)?;
    Ok(model.backward(&state, graph, &dz, None, None).0.flatten())
}

/// Check every parameter of `model` against central differences with step `delta`.
pub fn grad_check(
    model: &GatModel,
    features: &Array2<f64>,
    graph: &Graph,
    pairs: &[(usize, usize)],
    labels: &[f64],
    delta: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be > 0, got {delta}")));
    }
    let analytic = link_loss_gradient(model, features, graph, pairs, labels)?;
    let numeric = numeric_gradient(&model.flatten(), delta, |p| {
        link_loss_at(model, p, features, graph, pairs, labels)
    })?;
    Ok(compare(&analytic, &numeric, tolerance, |k| model.param_name(k)))
}
