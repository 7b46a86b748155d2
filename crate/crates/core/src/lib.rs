//! Link disambiguation for self-reported social-network survey data.
//!
//! A graph attention network is trained on unambiguous links; distances
//! between the resulting node embeddings pick between candidate alters and
//! decide whether a reported link exists. Decision-tree and MLP baselines,
//! a downstream risk-prediction benchmark, mask-based explanations and a
//! synthetic survey generator complete the toolkit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod disambig;
pub mod error;
pub mod explain;
pub mod gat;
pub mod metrics;
pub mod optim;
pub mod risk;
pub mod seed;
pub mod simulate;
pub mod synth;

pub use error::{Error, Result};
