//! Central finite-difference check of [`backward`](super::backward).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{backward, forward, NetworkConfig, NetworkParams, Weights};
use super::{Mode, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    /// Tensor name and flat index where it occurred.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares analytic and numeric gradients of `Σ_b c_b · score_b` for
/// random inputs and random `c`, with dropout masks held fixed by the seed.
///
/// `floor` keeps the relative error meaningful for gradients that are
/// numerically zero.
pub fn check_gradients(
    config: NetworkConfig,
    batch: usize,
    seed: u64,
    eps: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let mut params = NetworkParams::init(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // Move γ, β and the biases off their defaults so every path is exercised.
    for t in params.weights.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let n = config.steps * config.input_dim;
    let windows: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let coeffs: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
    let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    let drop_seed = seed.wrapping_add(1);

    let objective = |p: &NetworkParams| -> Result<f64> {
        let (s, _) = forward(p, &refs, Mode::Train, drop_seed)?;
        Ok(s.iter().zip(&coeffs).map(|(a, b)| a * b).sum())
    };

    let (_, cache) = forward(&params, &refs, Mode::Train, drop_seed)?;
    let grads: Weights = backward(&params, cache, &coeffs)?;
    let names = params.weights.tensor_names();
    let analytic: Vec<Vec<f64>> = grads.tensors().map(|t| t.data().to_vec()).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, name) in names.iter().enumerate() {
        for i in 0..analytic[ti].len() {
            let original = nth_tensor(&mut params.weights, ti)[i];
            nth_tensor(&mut params.weights, ti)[i] = original + eps;
            let up = objective(&params)?;
            nth_tensor(&mut params.weights, ti)[i] = original - eps;
            let down = objective(&params)?;
            nth_tensor(&mut params.weights, ti)[i] = original;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ti][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (name.clone(), i);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

fn nth_tensor(w: &mut Weights, i: usize) -> &mut [f64] {
    w.tensors_mut().nth(i).expect("tensor index in range").data_mut()
}
