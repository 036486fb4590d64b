//! Batch normalisation over the sample dimension of an `m × k` block.

use super::tensor::Tensor;
use super::{Mode, NnError, Result};

/// Running mean/variance used at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Tensor,
    pub var: Tensor,
}

impl RunningStats {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            mean: Tensor::zeros(shape),
            var: Tensor::filled(shape, 1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BnCache {
    m: usize,
    k: usize,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

/// Normalises each of the `k` columns of `x` (`m × k`, row-major).
///
/// Train mode uses the batch statistics (population variance) and returns a
/// cache; infer mode uses `running_mean` / `running_var`.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm(
    x: &[f64],
    m: usize,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    mode: Mode,
    eps: f64,
) -> Result<(Vec<f64>, Option<BnCache>)> {
    let k = gamma.len();
    if x.len() != m * k || beta.len() != k || running_mean.len() != k || running_var.len() != k {
        return Err(NnError::ShapeMismatch(format!(
            "batch norm over {m} × {k} got {} values",
            x.len()
        )));
    }
    match mode {
        Mode::Infer => {
            let y = x
                .chunks_exact(k)
                .flat_map(|row| {
                    (0..k).map(move |j| {
                        gamma[j] * (row[j] - running_mean[j]) / (running_var[j] + eps).sqrt()
                            + beta[j]
                    })
                })
                .collect();
            Ok((y, None))
        }
        Mode::Train => {
            if m < 2 {
                return Err(NnError::BatchTooSmall(m));
            }
            let mut mean = vec![0.0; k];
            for row in x.chunks_exact(k) {
                for j in 0..k {
                    mean[j] += row[j];
                }
            }
            mean.iter_mut().for_each(|v| *v /= m as f64);
            let mut var = vec![0.0; k];
            for row in x.chunks_exact(k) {
                for j in 0..k {
                    var[j] += (row[j] - mean[j]).powi(2);
                }
            }
            var.iter_mut().for_each(|v| *v /= m as f64);
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            let mut x_hat = vec![0.0; m * k];
            let mut y = vec![0.0; m * k];
            for i in 0..m {
                for j in 0..k {
                    let xh = (x[i * k + j] - mean[j]) * inv_std[j];
                    x_hat[i * k + j] = xh;
                    y[i * k + j] = gamma[j] * xh + beta[j];
                }
            }
            Ok((
                y,
                Some(BnCache {
                    m,
                    k,
                    x_hat,
                    inv_std,
                    batch_mean: mean,
                    batch_var: var,
                }),
            ))
        }
    }
}

/// Returns `dx` and accumulates into `d_gamma`, `d_beta`.
pub fn batch_norm_backward(
    cache: &BnCache,
    gamma: &[f64],
    dy: &[f64],
    d_gamma: &mut [f64],
    d_beta: &mut [f64],
) -> Vec<f64> {
    let (m, k) = (cache.m, cache.k);
    let mut sum_dxh = vec![0.0; k];
    let mut sum_dxh_xh = vec![0.0; k];
    for i in 0..m {
        for j in 0..k {
            let idx = i * k + j;
            d_gamma[j] += dy[idx] * cache.x_hat[idx];
            d_beta[j] += dy[idx];
            let dxh = dy[idx] * gamma[j];
            sum_dxh[j] += dxh;
            sum_dxh_xh[j] += dxh * cache.x_hat[idx];
        }
    }
    let mut dx = vec![0.0; m * k];
    let mf = m as f64;
    for i in 0..m {
        for j in 0..k {
            let idx = i * k + j;
            let dxh = dy[idx] * gamma[j];
            dx[idx] = cache.inv_std[j] / mf
                * (mf * dxh - sum_dxh[j] - cache.x_hat[idx] * sum_dxh_xh[j]);
        }
    }
    dx
}
