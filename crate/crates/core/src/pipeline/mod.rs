//! Sliding windows, feature scaling, training, walk-forward evaluation and
//! the long-or-flat backtest.

mod backtest;
mod metrics;
mod report;
mod scaler;
mod train;
mod walkforward;
mod window;

pub use backtest::{backtest_equity, positions};
pub use metrics::{accuracy, auc, auc_pair_count, evaluate};
pub use report::{write_loss_curve, BacktestReport, DailyRecord, Position, Summary};
pub use scaler::Scaler;
pub use train::{train_global, Hyper, TrainedModel};
pub use walkforward::{
    walk_forward, walk_forward_with, Forecaster, NetworkForecaster, WalkForwardConfig,
    WalkForwardOutcome,
};
pub use window::{make_windows, Window, WindowedDataset};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{rows} feature rows cannot fill a window of {steps} with a target")]
    TooFewRows { rows: usize, steps: usize },
    #[error("history of {rows} rows is shorter than the {warmup}-day warm-up")]
    TooShortHistory { rows: usize, warmup: usize },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("AUC is undefined when only one class is present")]
    OneClassOnly,
    #[error("no day with a non-zero realized return")]
    NoDecidedDays,
    #[error("length mismatch: {0} scores, {1} realized returns")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
