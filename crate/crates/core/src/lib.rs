//! Daily price forecasting: cleaning, feature construction, recurrent
//! networks and walk-forward evaluation.

pub mod garch;
pub mod indicators;
pub mod nn;
pub mod pipeline;
pub mod timeseries;
