//! Stationarity testing and GARCH(1,1) volatility attributes.

mod adf;
mod garch11;
mod optim;

pub use adf::{
    adf_test, AdfResult, AdfVariant, CriticalValues, JointStats, PHI2_CRITICAL, PHI3_CRITICAL,
    TAU1_CRITICAL, TAU3_CRITICAL,
};
pub use garch11::{
    conditional_variance, fit_garch11, fit_garch11_with, garch_attributes, garch_loglik,
    mean_equation_data, residuals, simulate_garch, simulate_garch_path, GarchConfig, GarchFit,
    GarchParams, GarchPath, MeanModel, MIN_GARCH_LEN,
};
pub use optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GarchError {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("regression design matrix is singular")]
    SingularRegression,
    #[error("constraint infeasible: {0}")]
    ConstraintInfeasible(String),
    #[error("optimizer diverged: {0}")]
    OptimizerDiverged(String),
    #[error("non-positive or non-finite value at index {0}")]
    NonPositivePrice(usize),
}

pub type Result<T, E = GarchError> = std::result::Result<T, E>;
