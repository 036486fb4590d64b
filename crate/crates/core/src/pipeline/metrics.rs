use super::{PipelineError, Result};

/// Fraction of non-zero-return days where the predicted direction (up iff
/// `score > 0`) matches the realised one.
pub fn accuracy(scores: &[f64], realized: &[f64]) -> Result<f64> {
    if scores.len() != realized.len() {
        return Err(PipelineError::LengthMismatch(scores.len(), realized.len()));
    }
    let (mut hits, mut n) = (0usize, 0usize);
    for (s, r) in scores.iter().zip(realized) {
        if *r == 0.0 {
            continue;
        }
        n += 1;
        if (*s > 0.0) == (*r > 0.0) {
            hits += 1;
        }
    }
    if n == 0 {
        return Err(PipelineError::NoDecidedDays);
    }
    Ok(hits as f64 / n as f64)
}

/// Area under the ROC curve of `scores` against the up/down label of
/// `realized` (zero returns belong to neither class).
///
/// The curve is walked one distinct score at a time, highest first, and the
/// trapezoids are summed in integer half-units, so the result is
/// `(2·wins + ties) / (2·P·N)` exactly.
pub fn auc(scores: &[f64], realized: &[f64]) -> Result<f64> {
    if scores.len() != realized.len() {
        return Err(PipelineError::LengthMismatch(scores.len(), realized.len()));
    }
    let mut labelled: Vec<(f64, bool)> = scores
        .iter()
        .zip(realized)
        .filter(|(_, r)| **r != 0.0)
        .map(|(s, r)| (*s, *r > 0.0))
        .collect();
    let pos = labelled.iter().filter(|(_, up)| *up).count() as u128;
    let neg = labelled.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(PipelineError::OneClassOnly);
    }
    labelled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < labelled.len() {
        let (tp0, fp0) = (tp, fp);
        let score = labelled[i].0;
        while i < labelled.len() && labelled[i].0 == score {
            if labelled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) * (tp + tp0);
    }
    Ok(twice_area as f64 / (2 * pos * neg) as f64)
}

/// Brute-force pair count: the share of (up, down) day pairs where the up
/// day has the higher score, ties counting half.
pub fn auc_pair_count(scores: &[f64], realized: &[f64]) -> Result<f64> {
    let up: Vec<f64> = scores.iter().zip(realized).filter(|(_, r)| **r > 0.0).map(|(s, _)| *s).collect();
    let down: Vec<f64> = scores.iter().zip(realized).filter(|(_, r)| **r < 0.0).map(|(s, _)| *s).collect();
    if up.is_empty() || down.is_empty() {
        return Err(PipelineError::OneClassOnly);
    }
    let mut twice = 0u128;
    for u in &up {
        for d in &down {
            twice += match u.partial_cmp(d) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(twice as f64 / (2 * up.len() as u128 * down.len() as u128) as f64)
}

/// `(accuracy, auc)`.
pub fn evaluate(scores: &[f64], realized: &[f64]) -> Result<(f64, f64)> {
    Ok((accuracy(scores, realized)?, auc(scores, realized)?))
}
