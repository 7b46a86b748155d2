//! One multi-head graph attention layer with an analytic backward pass.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Graph;
use crate::error::{Error, Result};

pub const DEFAULT_SLOPE: f64 = 0.2;

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Concatenate,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn grad(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Parameters of one attention head: `weight` is `out × in`, `attention`
/// has length `2·out` (source half first, neighbor half second).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatHead {
    pub weight: Array2<f64>,
    pub attention: Array1<f64>,
}

impl GatHead {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        GatHead {
            weight: Array2::zeros((out_dim, in_dim)),
            attention: Array1::zeros(2 * out_dim),
        }
    }

    /// Glorot-uniform initialization.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w_lim = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let a_lim = (6.0 / (1 + 2 * out_dim) as f64).sqrt();
        GatHead {
            weight: Array2::from_shape_simple_fn((out_dim, in_dim), || rng.random_range(-w_lim..w_lim)),
            attention: Array1::from_shape_simple_fn(2 * out_dim, || rng.random_range(-a_lim..a_lim)),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatLayer {
    pub heads: Vec<GatHead>,
    pub combine: Combine,
    pub slope: f64,
    pub activation: Activation,
}

/// Forward intermediates for one head.
#[derive(Debug, Clone)]
pub struct HeadState {
    /// `W h_j` for every node.
    pub projected: Array2<f64>,
    /// Pre-LeakyReLU score `aᵀ[W h_i ‖ W h_j]` per adjacency entry.
    pub scores: Vec<f64>,
    /// Raw logits `e_ij` per adjacency entry.
    pub logits: Vec<f64>,
    /// Softmax-normalized coefficients per adjacency entry.
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerState {
    pub input: Array2<f64>,
    pub heads: Vec<HeadState>,
    pub pre_activation: Array2<f64>,
    pub output: Array2<f64>,
}

/// Gradients for one layer, shaped like its parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub heads: Vec<GatHead>,
}

impl GatLayer {
    pub fn new(heads: Vec<GatHead>, combine: Combine, activation: Activation) -> Result<Self> {
        let layer = GatLayer {
            heads,
            combine,
            slope: DEFAULT_SLOPE,
            activation,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .heads
            .first()
            .ok_or_else(|| Error::InvalidParameter("layer has no heads".into()))?;
        if self.combine == Combine::Single && self.heads.len() != 1 {
            return Err(Error::InvalidParameter(format!(
                "single combine requires one head, got {}",
                self.heads.len()
            )));
        }
        for h in &self.heads {
            if h.weight.dim() != first.weight.dim() || h.attention.len() != 2 * h.out_dim() {
                return Err(Error::InvalidParameter("inconsistent head shapes".into()));
            }
            if h.weight.iter().chain(h.attention.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.heads[0].in_dim()
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].out_dim()
    }

    pub fn out_width(&self) -> usize {
        match self.combine {
            Combine::Concatenate => self.heads.len() * self.head_dim(),
            Combine::Single => self.head_dim(),
        }
    }

    /// Raw attention logits per head, one value per adjacency entry.
    pub fn attention_logits(&self, h: &Array2<f64>, graph: &Graph) -> Result<Vec<Vec<f64>>> {
        self.check_input(h, graph)?;
        Ok(self
            .heads
            .iter()
            .map(|head| {
                let projected = h.dot(&head.weight.t());
                head_logits(head, &projected, graph, self.slope).1
            })
            .collect())
    }

    fn check_input(&self, h: &Array2<f64>, graph: &Graph) -> Result<()> {
        if h.ncols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: h.ncols(),
            });
        }
        if h.nrows() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: h.nrows(),
            });
        }
        Ok(())
    }

    /// `edge_weights`, when given, scales each neighbor's message after the
    /// softmax (one weight per adjacency entry).
    pub fn forward(
        &self,
        h: &Array2<f64>,
        graph: &Graph,
        edge_weights: Option<&[f64]>,
    ) -> Result<LayerState> {
        self.check_input(h, graph)?;
        let n = graph.n();
        let o = self.head_dim();
        let mut pre = Array2::zeros((n, self.out_width()));
        let mut heads = Vec::with_capacity(self.heads.len());
        for (k, head) in self.heads.iter().enumerate() {
            let projected = h.dot(&head.weight.t());
            let (scores, logits) = head_logits(head, &projected, graph, self.slope);
            let alpha = attention_normalize(&logits, graph);
            let agg = aggregate(&alpha, &projected, graph, edge_weights);
            let cols = match self.combine {
                Combine::Concatenate => k * o..(k + 1) * o,
                Combine::Single => 0..o,
            };
            pre.slice_mut(s![.., cols]).assign(&agg);
            heads.push(HeadState {
                projected,
                scores,
                logits,
                alpha,
            });
        }
        let act = self.activation;
        let output = pre.mapv(|v| act.apply(v));
        Ok(LayerState {
            input: h.clone(),
            heads,
            pre_activation: pre,
            output,
        })
    }

    /// Backpropagate `d_output` through the layer. Returns parameter
    /// gradients and the gradient with respect to the layer input; edge
    /// weight gradients are accumulated into `d_edge` when present.
    pub fn backward(
        &self,
        state: &LayerState,
        graph: &Graph,
        d_output: &Array2<f64>,
        edge_weights: Option<&[f64]>,
        mut d_edge: Option<&mut [f64]>,
    ) -> (LayerGrads, Array2<f64>) {
        let n = graph.n();
        let o = self.head_dim();
        let act = self.activation;
        let mut d_pre = d_output.clone();
        d_pre.zip_mut_with(&state.pre_activation, |d, &p| *d *= act.grad(p));

        let mut d_input = Array2::zeros(state.input.dim());
        let mut grads = Vec::with_capacity(self.heads.len());
        for (k, (head, hs)) in self.heads.iter().zip(&state.heads).enumerate() {
            let cols = match self.combine {
                Combine::Concatenate => k * o..(k + 1) * o,
                Combine::Single => 0..o,
            };
            let d_head = d_pre.slice(s![.., cols]);
            let mut d_proj = Array2::<f64>::zeros((n, o));
            let mut d_src = vec![0.0; n];
            let mut d_dst = vec![0.0; n];
            let mut d_alpha = Vec::new();
            for i in 0..n {
                let start = graph.offset(i);
                let nbrs = graph.neighbors(i);
                let d_hi = d_head.row(i);
                d_alpha.clear();
                for (t, &j) in nbrs.iter().enumerate() {
                    let e = start + t;
                    let w = edge_weights.map_or(1.0, |ew| ew[e]);
                    let g = d_hi.dot(&hs.projected.row(j));
                    d_alpha.push(w * g);
                    if let Some(de) = d_edge.as_deref_mut() {
                        de[e] += hs.alpha[e] * g;
                    }
                    d_proj.row_mut(j).scaled_add(hs.alpha[e] * w, &d_hi);
                }
                let dot: f64 = nbrs
                    .iter()
                    .enumerate()
                    .map(|(t, _)| hs.alpha[start + t] * d_alpha[t])
                    .sum();
                for (t, &j) in nbrs.iter().enumerate() {
                    let e = start + t;
                    let d_logit = hs.alpha[e] * (d_alpha[t] - dot);
                    let d_score = d_logit * leaky_relu_grad(hs.scores[e], self.slope);
                    d_src[i] += d_score;
                    d_dst[j] += d_score;
                }
            }
            let a_src = head.attention.slice(s![..o]);
            let a_dst = head.attention.slice(s![o..]);
            let d_src = Array1::from(d_src);
            let d_dst = Array1::from(d_dst);
            let mut d_att = Array1::zeros(2 * o);
            d_att.slice_mut(s![..o]).assign(&hs.projected.t().dot(&d_src));
            d_att.slice_mut(s![o..]).assign(&hs.projected.t().dot(&d_dst));
            d_proj += &outer(&d_src, &a_src.to_owned());
            d_proj += &outer(&d_dst, &a_dst.to_owned());

            let d_weight = d_proj.t().dot(&state.input);
            d_input += &d_proj.dot(&head.weight);
            grads.push(GatHead {
                weight: d_weight,
                attention: d_att,
            });
        }
        (LayerGrads { heads: grads }, d_input)
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Pre-activation scores and LeakyReLU logits for all adjacency entries.
fn head_logits(head: &GatHead, projected: &Array2<f64>, graph: &Graph, slope: f64) -> (Vec<f64>, Vec<f64>) {
    let o = head.out_dim();
    let src = projected.dot(&head.attention.slice(s![..o]));
    let dst = projected.dot(&head.attention.slice(s![o..]));
    let mut scores = Vec::with_capacity(graph.n_entries());
    for i in 0..graph.n() {
        for &j in graph.neighbors(i) {
            scores.push(src[i] + dst[j]);
        }
    }
    let logits = scores.iter().map(|&u| leaky_relu(u, slope)).collect();
    (scores, logits)
}

/// Softmax of the logits over each node's neighborhood, max-shifted.
pub fn attention_normalize(logits: &[f64], graph: &Graph) -> Vec<f64> {
    let mut alpha = vec![0.0; logits.len()];
    for i in 0..graph.n() {
        let range = graph.offset(i)..graph.offset(i) + graph.neighbors(i).len();
        let m = logits[range.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for e in range.clone() {
            alpha[e] = (logits[e] - m).exp();
            z += alpha[e];
        }
        for e in range {
            alpha[e] /= z;
        }
    }
    alpha
}

/// `Σ_j α_ij · w_ij · (W h)_j` for every node (no nonlinearity).
pub fn aggregate(
    alpha: &[f64],
    projected: &Array2<f64>,
    graph: &Graph,
    edge_weights: Option<&[f64]>,
) -> Array2<f64> {
    let mut out = Array2::zeros((graph.n(), projected.ncols()));
    for i in 0..graph.n() {
        let start = graph.offset(i);
        let mut row = out.row_mut(i);
        for (t, &j) in graph.neighbors(i).iter().enumerate() {
            let e = start + t;
            let w = edge_weights.map_or(1.0, |ew| ew[e]);
            row.scaled_add(alpha[e] * w, &projected.row(j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(2.0, 0.2), 2.0);
        assert!((leaky_relu(-1.0, 0.2) + 0.2).abs() < 1e-15);
        assert_eq!(leaky_relu(0.0, 0.2), 0.0);
    }

    #[test]
    fn zero_attention_vector_gives_zero_logits() {
        let g = Graph::from_pairs(3, [(0, 1), (1, 2)]);
        let head = GatHead {
            weight: Array2::eye(2),
            attention: Array1::zeros(4),
        };
        let layer = GatLayer::new(vec![head], Combine::Single, Activation::Identity).unwrap();
        let h = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let logits = layer.attention_logits(&h, &g).unwrap();
        assert!(logits[0].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn one_dim_hand_evaluation() {
        let g = Graph::from_pairs(2, [(0, 1)]);
        let head = GatHead {
            weight: array![[1.0]],
            attention: array![1.0, 1.0],
        };
        let layer = GatLayer::new(vec![head], Combine::Single, Activation::Identity).unwrap();
        let logits = layer.attention_logits(&array![[1.0], [2.0]], &g).unwrap();
        // node 0's entries are (0,0) then (0,1)
        assert_eq!(logits[0][1], 3.0);
        assert_eq!(logits[0][0], 2.0);
    }

    #[test]
    fn softmax_cases() {
        let g = Graph::from_pairs(3, [(1, 2)]);
        // entries: (0,0) | (1,1),(1,2) | (2,1),(2,2)
        let a = attention_normalize(&[5.0, 7.0, 7.0, 1.0, 2.0], &g);
        assert_eq!(a[0], 1.0);
        assert!((a[1] - 0.5).abs() < 1e-15 && (a[2] - 0.5).abs() < 1e-15);
        assert!((a[3] - 0.26894).abs() < 1e-5 && (a[4] - 0.73106).abs() < 1e-5);
        let big = attention_normalize(&[0.0, 1e4, 1e4 - 1.0, 0.0, 0.0], &g);
        assert!(big.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn aggregate_single_neighbor_and_cancellation() {
        let g = Graph::from_pairs(1, []);
        let p = array![[1.5, -2.0]];
        assert_eq!(aggregate(&[1.0], &p, &g, None), p);

        let g = Graph::from_pairs(3, [(0, 1)]);
        // node 2 is isolated; nodes 0 and 1 each see {0, 1}
        let p = array![[1.0, -3.0], [-1.0, 3.0], [0.0, 0.0]];
        let agg = aggregate(&[0.5, 0.5, 0.5, 0.5, 1.0], &p, &g, None);
        let relu = agg.mapv(|v| Activation::Relu.apply(v));
        assert!(relu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = seed::rng(1);
        let layer = GatLayer::new(vec![GatHead::glorot(3, 2, &mut rng)], Combine::Single, Activation::Identity).unwrap();
        let g = Graph::from_pairs(2, [(0, 1)]);
        assert!(layer.forward(&Array2::zeros((2, 4)), &g, None).is_err());
        assert!(GatLayer::new(vec![GatHead::zeros(3, 2), GatHead::zeros(3, 2)], Combine::Single, Activation::Identity).is_err());
    }
}
