//! Stacked attention layers, flat parameter views and link scoring.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, Combine, GatHead, GatLayer, LayerGrads, LayerState};
use crate::data::Graph;
use crate::error::{Error, Result};
use crate::seed;

/// Layer/channel layout. The default is the 16-channel, 8-head stack with
/// two hidden layers and a 7-channel single-head output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub hidden_channels: usize,
    pub heads: usize,
    /// Total number of attention layers, output layer included.
    pub layers: usize,
    pub out_channels: usize,
    pub slope: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            hidden_channels: 16,
            heads: 8,
            layers: 3,
            out_channels: 7,
            slope: super::layer::DEFAULT_SLOPE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatModel {
    pub layers: Vec<GatLayer>,
}

/// Final-layer node vectors, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings(pub Array2<f64>);

impl Embeddings {
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn scaled(&self, c: f64) -> Embeddings {
        Embeddings(&self.0 * c)
    }
}

/// Cached per-layer intermediates of a forward pass.
#[derive(Debug, Clone)]
pub struct AttentionState {
    pub layers: Vec<LayerState>,
}

impl AttentionState {
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("model has layers").output
    }
}

impl GatModel {
    pub fn new(layers: Vec<GatLayer>) -> Result<Self> {
        let m = GatModel { layers };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("model has no layers".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for w in self.layers.windows(2) {
            if w[0].out_width() != w[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].out_width(),
                    got: w[1].in_dim(),
                });
            }
        }
        Ok(())
    }

    /// Glorot-initialized model for `in_dim` input features.
    pub fn init(in_dim: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        if arch.layers == 0 || arch.heads == 0 || arch.hidden_channels == 0 || arch.out_channels == 0 {
            return Err(Error::InvalidParameter(format!("invalid architecture {arch:?}")));
        }
        let mut rng = seed::rng(seed);
        let mut layers = Vec::with_capacity(arch.layers);
        let mut width = in_dim;
        for li in 0..arch.layers {
            let last = li + 1 == arch.layers;
            let (out, heads, combine, act) = if last {
                (arch.out_channels, 1, Combine::Single, Activation::Identity)
            } else {
                (arch.hidden_channels, arch.heads, Combine::Concatenate, Activation::Relu)
            };
            let hs = (0..heads).map(|_| GatHead::glorot(width, out, &mut rng)).collect();
            let mut layer = GatLayer::new(hs, combine, act)?;
            layer.slope = arch.slope;
            width = layer.out_width();
            layers.push(layer);
        }
        GatModel::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, GatLayer::out_width)
    }

    /// Output width of every layer, in order.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(GatLayer::out_width).collect()
    }

    pub fn forward(&self, features: &Array2<f64>, graph: &Graph) -> Result<(Embeddings, AttentionState)> {
        let state = self.forward_weighted(features, graph, None)?;
        Ok((Embeddings(state.output().clone()), state))
    }

    pub fn embed(&self, features: &Array2<f64>, graph: &Graph) -> Result<Embeddings> {
        Ok(self.forward(features, graph)?.0)
    }

    pub fn forward_weighted(
        &self,
        features: &Array2<f64>,
        graph: &Graph,
        edge_weights: Option<&[f64]>,
    ) -> Result<AttentionState> {
        if let Some(ew) = edge_weights {
            if ew.len() != graph.n_entries() {
                return Err(Error::DimensionMismatch {
                    expected: graph.n_entries(),
                    got: ew.len(),
                });
            }
        }
        let mut layers: Vec<LayerState> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = layers.last().map_or(features, |s| &s.output);
            let st = layer.forward(input, graph, edge_weights)?;
            layers.push(st);
        }
        Ok(AttentionState { layers })
    }

    /// Gradients of a scalar loss given `d_output = ∂L/∂z`. Returns the
    /// parameter gradients (as a model-shaped value) and `∂L/∂features`.
    pub fn backward(
        &self,
        state: &AttentionState,
        graph: &Graph,
        d_output: &Array2<f64>,
        edge_weights: Option<&[f64]>,
        mut d_edge: Option<&mut [f64]>,
    ) -> (GatModel, Array2<f64>) {
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut d = d_output.clone();
        for (layer, st) in self.layers.iter().zip(&state.layers).rev() {
            let (g, d_in) = layer.backward(st, graph, &d, edge_weights, d_edge.as_deref_mut());
            grads.push(g);
            d = d_in;
        }
        grads.reverse();
        let layers = self
            .layers
            .iter()
            .zip(grads)
            .map(|(l, g)| GatLayer {
                heads: g.heads,
                combine: l.combine,
                slope: l.slope,
                activation: l.activation,
            })
            .collect();
        (GatModel { layers }, d)
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.heads)
            .map(|h| h.weight.len() + h.attention.len())
            .sum()
    }

    /// Parameters in a fixed order: per layer, per head, `W` row-major then `a`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for h in self.layers.iter().flat_map(|l| &l.heads) {
            out.extend(h.weight.iter());
            out.extend(h.attention.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut it = flat.iter();
        for h in self.layers.iter_mut().flat_map(|l| &mut l.heads) {
            for w in h.weight.iter_mut().chain(h.attention.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
    }

    /// Human-readable name of flat parameter `idx`, e.g. `layer1.head3.W[2,5]`.
    pub fn param_name(&self, mut idx: usize) -> String {
        for (li, l) in self.layers.iter().enumerate() {
            for (hi, h) in l.heads.iter().enumerate() {
                if idx < h.weight.len() {
                    let (r, c) = (idx / h.in_dim(), idx % h.in_dim());
                    return format!("layer{}.head{}.W[{r},{c}]", li + 1, hi + 1);
                }
                idx -= h.weight.len();
                if idx < h.attention.len() {
                    return format!("layer{}.head{}.a[{idx}]", li + 1, hi + 1);
                }
                idx -= h.attention.len();
            }
        }
        format!("<out of range {idx}>")
    }

    /// Stable content hash of the parameters.
    pub fn param_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in self.flatten() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Link probability from two embeddings: logistic of their inner product.
pub fn link_score(zi: ArrayView1<f64>, zj: ArrayView1<f64>) -> f64 {
    logistic(zi.dot(&zj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn default_widths() {
        let m = GatModel::init(30, &Architecture::default(), 1).unwrap();
        assert_eq!(m.widths(), vec![128, 128, 7]);
        assert_eq!(m.layers[1].in_dim(), 128);
        assert_eq!(m.layers[0].heads.len(), 8);
        assert_eq!(m.layers[2].heads.len(), 1);
    }

    #[test]
    fn flatten_roundtrip_and_names() {
        let arch = Architecture { hidden_channels: 2, heads: 2, layers: 2, out_channels: 3, slope: 0.2 };
        let m = GatModel::init(4, &arch, 3).unwrap();
        let flat = m.flatten();
        assert_eq!(flat.len(), m.n_params());
        let mut m2 = GatModel::init(4, &arch, 4).unwrap();
        m2.set_flat(&flat);
        assert_eq!(m, m2);
        assert_eq!(m.param_name(0), "layer1.head1.W[0,0]");
        assert_eq!(m.param_name(8), "layer1.head1.a[0]");
        assert_eq!(m.param_name(12), "layer1.head2.W[0,0]");
    }

    #[test]
    fn link_score_values() {
        let z = array![0.0, 1.0];
        let w = array![1.0, 0.0];
        assert_eq!(link_score(z.view(), w.view()), 0.5);
        // ‖z‖² = ln(99) gives 0.99
        let c = (4.59512f64 / 2.0).sqrt();
        let v = array![c, c];
        assert!((link_score(v.view(), v.view()) - 0.99).abs() < 1e-6);
        let a = array![0.3, -1.2, 2.0];
        let b = array![-0.7, 0.4, 1.1];
        assert_eq!(link_score(a.view(), b.view()), link_score(b.view(), a.view()));
    }
}
