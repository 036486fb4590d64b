//! Augmented Dickey-Fuller unit-root test.
//!
//! Test regression, with `p` lagged differences:
//!
//! ```text
//! Δy_t = ρ·y_{t-1} [+ c + b·t] + Σ_{i=1..p} γ_i·Δy_{t-i} + e_t
//! ```
//!
//! The statistic is the t-ratio of ρ. For the trend variant the joint F
//! statistics phi2 (ρ = c = b = 0) and phi3 (ρ = b = 0) are also reported.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GarchError, Result};

/// Critical values at the 1%, 5% and 10% levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub pct1: f64,
    pub pct5: f64,
    pub pct10: f64,
}

/// No deterministic terms.
pub const TAU1_CRITICAL: CriticalValues = CriticalValues {
    pct1: -2.58,
    pct5: -1.95,
    pct10: -1.62,
};
/// Constant and linear trend.
pub const TAU3_CRITICAL: CriticalValues = CriticalValues {
    pct1: -3.96,
    pct5: -3.41,
    pct10: -3.12,
};
pub const PHI2_CRITICAL: CriticalValues = CriticalValues {
    pct1: 6.09,
    pct5: 4.68,
    pct10: 4.03,
};
pub const PHI3_CRITICAL: CriticalValues = CriticalValues {
    pct1: 8.27,
    pct5: 6.25,
    pct10: 5.34,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdfVariant {
    /// tau1: no constant, no trend.
    None,
    /// tau3: constant and trend.
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointStats {
    pub phi2: f64,
    pub phi3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub variant: AdfVariant,
    pub statistic: f64,
    pub joint_stats: Option<JointStats>,
    pub critical_values: CriticalValues,
    pub reject_at_1pct: bool,
    pub lags: usize,
    pub n_obs: usize,
}

struct Ols {
    coef: DVector<f64>,
    rss: f64,
    xtx_inv: DMatrix<f64>,
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Ols> {
    let xt = x.transpose();
    let xtx = &xt * x;
    let chol = xtx.cholesky().ok_or(GarchError::SingularRegression)?;
    let coef = chol.solve(&(&xt * y));
    let resid = y - x * &coef;
    Ok(Ols {
        coef,
        rss: resid.dot(&resid),
        xtx_inv: chol.inverse(),
    })
}

/// Runs the ADF regression on `series` and compares against the tabulated
/// critical values.
pub fn adf_test(series: &[f64], variant: AdfVariant, lags: usize) -> Result<AdfResult> {
    let n = series.len();
    if n <= lags + 10 {
        return Err(GarchError::SeriesTooShort {
            needed: lags + 11,
            got: n,
        });
    }
    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // diff[k] = y[k+1] - y[k]; regress diff[k] for k in lags..n-1
    let rows = diff.len() - lags;
    let det = match variant {
        AdfVariant::None => 0,
        AdfVariant::Trend => 2,
    };
    let k = 1 + det + lags;

    let dy = DVector::from_iterator(rows, (lags..diff.len()).map(|t| diff[t]));
    let design = |with_level: bool, with_const: bool, with_trend: bool| {
        let cols = with_level as usize + with_const as usize + with_trend as usize + lags;
        DMatrix::from_fn(rows, cols, |r, c| {
            let t = r + lags;
            let mut c = c;
            if with_level {
                if c == 0 {
                    return series[t];
                }
                c -= 1;
            }
            if with_const {
                if c == 0 {
                    return 1.0;
                }
                c -= 1;
            }
            if with_trend {
                if c == 0 {
                    return (t + 1) as f64;
                }
                c -= 1;
            }
            diff[t - 1 - c]
        })
    };

    let full = ols(&design(true, det > 0, det > 0), &dy)?;
    let dof = (rows - k) as f64;
    let s2 = full.rss / dof;
    let se = (s2 * full.xtx_inv[(0, 0)]).sqrt();
    let statistic = full.coef[0] / se;

    let (critical_values, joint_stats) = match variant {
        AdfVariant::None => (TAU1_CRITICAL, None),
        AdfVariant::Trend => {
            let restricted_rss = |x: DMatrix<f64>| -> Result<f64> {
                if x.ncols() == 0 {
                    return Ok(dy.dot(&dy));
                }
                Ok(ols(&x, &dy)?.rss)
            };
            let f_stat = |rss_r: f64, q: f64| ((rss_r - full.rss) / q) / s2;
            let phi2 = f_stat(restricted_rss(design(false, false, false))?, 3.0);
            let phi3 = f_stat(restricted_rss(design(false, true, false))?, 2.0);
            (TAU3_CRITICAL, Some(JointStats { phi2, phi3 }))
        }
    };

    Ok(AdfResult {
        variant,
        statistic,
        joint_stats,
        critical_values,
        reject_at_1pct: statistic < critical_values.pct1,
        lags,
        n_obs: rows,
    })
}
