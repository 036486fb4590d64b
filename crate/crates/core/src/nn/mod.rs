//! Recurrent forecasting networks with hand-written reverse-mode gradients.
//!
//! Every layer exposes a forward pass that returns a cache and a backward
//! pass that consumes it. [`network`] wires them into the three model
//! variants and [`rmsprop`] updates the weights.

#![allow(clippy::needless_range_loop)]

mod attention;
mod batchnorm;
pub mod checkpoint;
mod dropout;
pub mod gradcheck;
mod lstm;
pub mod network;
pub mod rmsprop;
mod tensor;

pub use attention::{attention_backward, attention_forward, softmax};
pub use batchnorm::{batch_norm, batch_norm_backward, BnCache, RunningStats};
pub use checkpoint::Checkpoint;
pub use dropout::dropout;
pub use gradcheck::{check_gradients, GradCheckReport};
pub use lstm::{
    bilstm_forward, layer_backward, layer_forward, lstm_cell_backward, lstm_cell_forward,
    CellCache, LayerCache, LstmCellParams, RecurrentLayer,
};
pub use network::{
    backward, forward, mse_loss, predict, ForwardCache, NetworkConfig, NetworkParams, Variant,
    Weights,
};
pub use rmsprop::{rmsprop_step, RmsPropConfig, RmsPropState};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch norm needs at least 2 samples in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("cache does not belong to the current parameters")]
    StaleCache,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
