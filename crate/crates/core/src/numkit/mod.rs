//! Dense matrices, feedforward networks with reverse-mode gradients, Adam,
//! losses and target-network averaging.

mod checkpoint;
mod loss;
mod matrix;
mod mlp;
mod optim;

pub use checkpoint::{load_mlp, read_mlp, save_mlp, write_mlp};
pub use loss::{cross_entropy_with_l2, mse, prob_class1, PROB_CLAMP};
pub use matrix::DenseMatrix;
pub use mlp::{Activation, Gradients, Layer, LayerGrad, LayerSpec, Mlp};
pub use optim::{adam_step, soft_update, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("backward called without a cached forward pass")]
    MissingCache,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
