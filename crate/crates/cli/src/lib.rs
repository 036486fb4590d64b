//! Batch commands behind the `pricecast` binary.
//!
//! Every command reads its inputs from the paths in a [`RunConfig`] and
//! writes into a fixed layout under the output directory:
//!
//! ```text
//! <out>/cleaned/      <asset>.csv, <asset>-fill.json
//! <out>/features/     <asset>.csv, <asset>-garch.json, <asset>-adf.json
//! <out>/checkpoints/  <asset>-<variant>-global.ckpt, <asset>-<variant>-walkforward.ckpt
//! <out>/reports/      loss curves, daily backtest CSVs and JSON summaries
//! ```

pub mod commands;
pub mod config;

use std::path::PathBuf;

pub use commands::{cmd_clean, cmd_features, cmd_report, cmd_train, cmd_walkforward};
pub use config::RunConfig;

use pricecast_core::garch::GarchError;
use pricecast_core::indicators::IndicatorError;
use pricecast_core::nn::NnError;
use pricecast_core::pipeline::PipelineError;
use pricecast_core::timeseries::TimeseriesError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no checkpoint at {0}; run `train` first")]
    MissingCheckpoint(PathBuf),
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
    #[error("GARCH: {0}")]
    Garch(#[from] GarchError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl CliError {
    /// 2 for configuration mistakes, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
