//! Stacked-LSTM classifier with hand-derived gradients.
//!
//! Per timestep the 3-channel input goes through a dense ReLU projection,
//! then two LSTM layers; the output layer reads the last hidden state of the
//! upper layer and a softmax turns it into class probabilities.

pub mod cell;
pub mod checkpoint;
pub mod gradcheck;
pub mod network;
pub mod optim;
pub mod params;

use thiserror::Error;

pub use cell::{lstm_cell_forward, LstmState};
pub use checkpoint::{checkpoint_precision, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gradcheck::{grad_check, GradCheckReport};
pub use network::{backward, batch_loss_and_gradients, forward, loss, predict_proba, ForwardCache};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
pub use params::{init_params, Dims, Gate, Gradients, LstmLayerParams, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("forward cache was produced by different parameters")]
    CacheMismatch,
}
