/// Long (1) iff the score is strictly positive, else flat (0).
pub fn positions(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|s| if *s > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// Long-or-flat, full-notional compounding with no costs. Returns
/// `n + 1` values starting at `initial`.
pub fn backtest_equity(predictions: &[f64], realized: &[f64], initial: f64) -> Vec<f64> {
    let mut equity = Vec::with_capacity(predictions.len() + 1);
    equity.push(initial);
    let mut e = initial;
    for (p, r) in positions(predictions).iter().zip(realized) {
        if *p > 0.0 {
            e *= 1.0 + r;
        }
        equity.push(e);
    }
    equity
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_flat() {
        assert_eq!(backtest_equity(&[-1.0, 0.0], &[0.1, -0.1], 1000.0), vec![1000.0; 3]);
    }

    #[test]
    fn always_long() {
        let e = backtest_equity(&[1.0, 1.0], &[0.1, -0.1], 1000.0);
        assert_eq!(e[0], 1000.0);
        assert!((e[1] - 1100.0).abs() < 1e-9);
        assert!((e[2] - 990.0).abs() < 1e-9);
    }

    #[test]
    fn sign_oracle() {
        let e = backtest_equity(&[0.1, -0.1], &[0.1, -0.1], 1000.0);
        assert!((e[1] - 1100.0).abs() < 1e-9);
        assert_eq!(e[2], e[1]);
    }

    #[test]
    fn empty_run() {
        assert_eq!(backtest_equity(&[], &[], 1000.0), vec![1000.0]);
    }
}
