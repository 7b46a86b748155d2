//! Graph attention embedding model.

mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{
    compare, grad_check, link_loss_at, link_loss_gradient, numeric_gradient, relative_error, GradCheckReport,
};
pub use layer::{
    aggregate, attention_normalize, leaky_relu, Activation, Combine, GatHead, GatLayer, HeadState, LayerState,
    DEFAULT_SLOPE,
};
pub use loss::{bce_loss, link_loss_grad, LinkBatch, PROB_EPS};
pub use model::{link_score, logistic, Architecture, AttentionState, Embeddings, GatModel};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory};
