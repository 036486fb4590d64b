//! RMSProp: `r ← ρ·r + (1 − ρ)·g²`, `θ ← θ − lr·g / √(δ + r)`.

use serde::{Deserialize, Serialize};

use super::network::{NetworkParams, Weights};
use super::tensor::Tensor;
use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub rho: f64,
    pub delta: f64,
}

impl RmsPropConfig {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            rho: 0.9,
            delta: 1e-8,
        }
    }
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self::new(0.001)
    }
}

/// Squared-gradient accumulators, one per weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub r: Vec<Tensor>,
    pub steps: u64,
}

impl RmsPropState {
    pub fn new(weights: &Weights) -> Self {
        Self {
            r: weights.tensors().map(Tensor::zeros_like).collect(),
            steps: 0,
        }
    }
}

/// Updates one flat parameter block in place.
pub fn rmsprop_update(theta: &mut [f64], grad: &[f64], r: &mut [f64], cfg: &RmsPropConfig) {
    for ((t, g), acc) in theta.iter_mut().zip(grad).zip(r.iter_mut()) {
        *acc = cfg.rho * *acc + (1.0 - cfg.rho) * g * g;
        *t -= cfg.lr * g / (cfg.delta + *acc).sqrt();
    }
}

/// Applies one step to every weight and bumps the parameter version.
pub fn rmsprop_step(
    params: &mut NetworkParams,
    grads: &Weights,
    state: &mut RmsPropState,
    cfg: &RmsPropConfig,
) -> Result<()> {
    let n = params.weights.tensors().count();
    if grads.tensors().count() != n || state.r.len() != n {
        return Err(NnError::ShapeMismatch("optimizer state does not fit the network".into()));
    }
    let shapes_match = params
        .weights
        .tensors()
        .zip(grads.tensors())
        .zip(&state.r)
        .all(|((p, g), r)| p.shape() == g.shape() && p.shape() == r.shape());
    if !shapes_match {
        return Err(NnError::ShapeMismatch("gradient shapes differ from weights".into()));
    }
    for ((p, g), r) in params
        .weights
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.r.iter_mut())
    {
        rmsprop_update(p.data_mut(), g.data(), r.data_mut(), cfg);
    }
    state.steps += 1;
    params.version += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{NetworkConfig, Variant};

    #[test]
    fn first_step_from_zero_state() {
        let cfg = RmsPropConfig::new(0.01);
        let mut theta = [0.0];
        let mut r = [0.0];
        rmsprop_update(&mut theta, &[1.0], &mut r, &cfg);
        assert!((r[0] - 0.1).abs() < 1e-15);
        let expected = -0.01 / (0.1f64 + 1e-8).sqrt();
        assert!((theta[0] - expected).abs() < 1e-15);
        assert!((theta[0] + 0.031623).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_only_decays_accumulator() {
        let cfg = RmsPropConfig::new(0.01);
        let mut theta = [2.5];
        let mut r = [0.4];
        rmsprop_update(&mut theta, &[0.0], &mut r, &cfg);
        assert_eq!(theta[0], 2.5);
        assert!((r[0] - 0.36).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_accumulator_converges() {
        let cfg = RmsPropConfig::new(0.01);
        let mut theta = [0.0];
        let mut r = [0.0];
        for _ in 0..400 {
            rmsprop_update(&mut theta, &[0.5], &mut r, &cfg);
        }
        assert!((r[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn step_bumps_version_and_checks_shapes() {
        let mut p = NetworkParams::init(NetworkConfig::new(Variant::Lstm, 2, 3, 4), 1).unwrap();
        let mut grads = p.weights.zeros_like();
        grads.head_b.data_mut()[0] = 1.0;
        let mut state = RmsPropState::new(&p.weights);
        let before = p.weights.head_b.data()[0];
        rmsprop_step(&mut p, &grads, &mut state, &RmsPropConfig::new(0.01)).unwrap();
        assert_eq!(p.version, 1);
        assert!(p.weights.head_b.data()[0] < before);

        let other = NetworkParams::init(NetworkConfig::new(Variant::BiLstm, 2, 3, 4), 1).unwrap();
        let mut bad_state = RmsPropState::new(&other.weights);
        assert!(matches!(
            rmsprop_step(&mut p, &grads, &mut bad_state, &RmsPropConfig::new(0.01)),
            Err(NnError::ShapeMismatch(_))
        ));
    }
}
