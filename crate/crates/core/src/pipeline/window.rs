use chrono::NaiveDate;

use super::{PipelineError, Result};
use crate::indicators::FeatureMatrix;

/// `steps` consecutive feature rows ending at `end_row`, and the return
/// realised on the following date.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub end_row: usize,
    pub end_date: NaiveDate,
    /// Row-major `steps × width`.
    pub data: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub steps: usize,
    pub width: usize,
    pub windows: Vec<Window>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// One window per end row `steps − 1 ..= rows − 2`, so `rows − steps` in all.
pub fn make_windows(features: &FeatureMatrix, steps: usize) -> Result<WindowedDataset> {
    let rows = features.rows();
    if steps == 0 {
        return Err(PipelineError::InvalidConfig("window length must be positive".into()));
    }
    if rows <= steps {
        return Err(PipelineError::TooFewRows { rows, steps });
    }
    let windows = (steps - 1..rows - 1)
        .map(|end| Window {
            end_row: end,
            end_date: features.dates()[end],
            data: features.block(end + 1 - steps, end + 1).to_vec(),
            target: features.target()[end],
        })
        .collect();
    Ok(WindowedDataset {
        steps,
        width: features.width(),
        windows,
    })
}
