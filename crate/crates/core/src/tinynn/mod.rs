//! A small dense feedforward network engine: ReLU hidden layers, a softmax
//! or sigmoid head, reverse-mode gradients, Adam, and a finite-difference
//! gradient oracle.

mod adam;
mod gradcheck;
mod loss;
mod network;
mod serialize;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use loss::{cross_entropy_loss, log_floored, LossSpec, PROB_FLOOR};
pub use network::{DenseNetwork, ForwardCache, Gradients, OutputHead};
pub use serialize::{ModelDocument, FeatureScaling, MODEL_FORMAT_VERSION};
pub use train::{fit, train_supervised, BatchLoss, TrainHyper};
