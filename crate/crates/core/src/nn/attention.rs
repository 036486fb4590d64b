//! Dot-product attention over time steps.

use super::{NnError, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Scores every row of `hidden` (`steps × width`) against `query`, and
/// returns the softmax-weighted context vector with the weights.
pub fn attention_forward(hidden: &[f64], query: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let width = query.len();
    if width == 0 || hidden.is_empty() || !hidden.len().is_multiple_of(width) {
        return Err(NnError::ShapeMismatch(format!(
            "hidden sequence of {} values does not split into rows of {width}",
            hidden.len()
        )));
    }
    let scores: Vec<f64> = hidden
        .chunks_exact(width)
        .map(|row| row.iter().zip(query).map(|(a, b)| a * b).sum())
        .collect();
    let weights = softmax(&scores);
    let mut context = vec![0.0; width];
    for (row, w) in hidden.chunks_exact(width).zip(&weights) {
        for (c, v) in context.iter_mut().zip(row) {
            *c += w * v;
        }
    }
    Ok((context, weights))
}

/// Returns `(d_hidden, d_query)` given the upstream context gradient.
pub fn attention_backward(
    hidden: &[f64],
    query: &[f64],
    weights: &[f64],
    d_context: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let width = query.len();
    let d_weight: Vec<f64> = hidden
        .chunks_exact(width)
        .map(|row| row.iter().zip(d_context).map(|(a, b)| a * b).sum())
        .collect();
    let mean_dw: f64 = weights.iter().zip(&d_weight).map(|(w, d)| w * d).sum();
    let d_score: Vec<f64> = weights
        .iter()
        .zip(&d_weight)
        .map(|(w, d)| w * (d - mean_dw))
        .collect();

    let mut d_hidden = vec![0.0; hidden.len()];
    let mut d_query = vec![0.0; width];
    for (t, row) in hidden.chunks_exact(width).enumerate() {
        let dh = &mut d_hidden[t * width..(t + 1) * width];
        for k in 0..width {
            dh[k] = weights[t] * d_context[k] + d_score[t] * query[k];
            d_query[k] += d_score[t] * row[k];
        }
    }
    (d_hidden, d_query)
}
