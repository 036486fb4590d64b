//! GARCH(1,1) with an AR(1) mean equation, fitted by Gaussian conditional
//! maximum likelihood.
//!
//! ```text
//! y_t = φ·x_t + μ_t,          μ_t ~ N(0, σ²_t)
//! σ²_t = α0 + α1·μ²_{t-1} + β1·σ²_{t-1}
//! ```
//!
//! `x_t` is the previous observation of the modelled series (`y_{t-1}`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::optim::{nelder_mead, NelderMeadOptions};
use super::{GarchError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Shortest price series accepted by [`fit_garch11`].
pub const MIN_GARCH_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub phi: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl GarchParams {
    pub fn new(phi: f64, alpha0: f64, alpha1: f64, beta1: f64) -> Self {
        Self {
            phi,
            alpha0,
            alpha1,
            beta1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.phi, self.alpha0, self.alpha1, self.beta1]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(GarchError::ConstraintInfeasible("non-finite parameter".into()));
        }
        if self.alpha0 <= 0.0 {
            return Err(GarchError::ConstraintInfeasible(format!(
                "alpha0 must be > 0, got {}",
                self.alpha0
            )));
        }
        if self.alpha1 < 0.0 || self.beta1 < 0.0 {
            return Err(GarchError::ConstraintInfeasible(
                "alpha1 and beta1 must be >= 0".into(),
            ));
        }
        if self.alpha1 + self.beta1 >= 1.0 {
            return Err(GarchError::ConstraintInfeasible(format!(
                "alpha1 + beta1 = {} must be < 1",
                self.alpha1 + self.beta1
            )));
        }
        Ok(())
    }

    /// α0 / (1 - α1 - β1).
    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha1 - self.beta1)
    }
}

/// Which series enters the mean equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanModel {
    /// Price regressed on the previous day's price.
    #[default]
    LaggedPrice,
    /// Daily return regressed on the previous day's return.
    LaggedReturn,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GarchConfig {
    pub mean: MeanModel,
    pub optimizer: NelderMeadOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub mean: MeanModel,
    pub loglik: f64,
    /// Number of leading input dates without a residual.
    pub lead: usize,
    /// Length of the price series the model was fitted on.
    pub n_input: usize,
    #[serde(skip)]
    pub mu: Vec<f64>,
    #[serde(skip)]
    pub sigma2: Vec<f64>,
}

impl GarchFit {
    /// Parameters and log-likelihood as a one-line JSON record.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("GarchFit serialises")
    }

    /// Reads a record written by [`GarchFit::to_json`]; series are left empty.
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Builds `(y, x, lead)` for the chosen mean equation.
pub fn mean_equation_data(prices: &[f64], mean: MeanModel) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let bad = match mean {
        MeanModel::LaggedPrice => prices.iter().position(|p| !p.is_finite()),
        MeanModel::LaggedReturn => prices.iter().position(|p| !(p.is_finite() && *p > 0.0)),
    };
    if let Some(i) = bad {
        return Err(GarchError::NonPositivePrice(i));
    }
    match mean {
        MeanModel::LaggedPrice => {
            let y = prices.get(1..).unwrap_or_default().to_vec();
            let x = prices[..prices.len().saturating_sub(1)].to_vec();
            Ok((y, x, 1))
        }
        MeanModel::LaggedReturn => {
            let r: Vec<f64> = prices.windows(2).map(|w| (w[1] - w[0]) / w[1]).collect();
            let y = r.get(1..).unwrap_or_default().to_vec();
            let x = r[..r.len().saturating_sub(1)].to_vec();
            Ok((y, x, 2))
        }
    }
}

/// μ_t = y_t - φ·x_t.
pub fn residuals(phi: f64, y: &[f64], x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yt, xt)| yt - phi * xt).collect()
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Forward variance recursion, seeded with the sample variance of `mu`.
pub fn conditional_variance(params: &GarchParams, mu: &[f64]) -> Vec<f64> {
    let mut sigma2 = Vec::with_capacity(mu.len());
    if mu.is_empty() {
        return sigma2;
    }
    sigma2.push(population_variance(mu));
    for t in 1..mu.len() {
        let prev = sigma2[t - 1];
        sigma2.push(params.alpha0 + params.alpha1 * mu[t - 1] * mu[t - 1] + params.beta1 * prev);
    }
    sigma2
}

fn loglik_from(mu: &[f64], sigma2: &[f64]) -> f64 {
    mu.iter()
        .zip(sigma2)
        .map(|(m, s)| -0.5 * (LN_2PI + s.ln() + m * m / s))
        .sum()
}

/// Gaussian conditional log-likelihood of the mean/variance model.
pub fn garch_loglik(params: &GarchParams, y: &[f64], x: &[f64]) -> f64 {
    let mu = residuals(params.phi, y, x);
    let sigma2 = conditional_variance(params, &mu);
    loglik_from(&mu, &sigma2)
}

pub fn fit_garch11(prices: &[f64]) -> Result<GarchFit> {
    fit_garch11_with(prices, &GarchConfig::default())
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v.clamp(-30.0, 30.0)).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn fit_garch11_with(prices: &[f64], cfg: &GarchConfig) -> Result<GarchFit> {
    if prices.len() < MIN_GARCH_LEN {
        return Err(GarchError::SeriesTooShort {
            needed: MIN_GARCH_LEN,
            got: prices.len(),
        });
    }
    let (y, x, lead) = mean_equation_data(prices, cfg.mean)?;

    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    if sxx <= 0.0 {
        return Err(GarchError::ConstraintInfeasible("regressor is identically zero".into()));
    }
    let phi_ols = sxy / sxx;
    let resid_var = population_variance(&residuals(phi_ols, &y, &x));
    let scale = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    if resid_var.is_nan() || resid_var <= 1e-14 * scale || resid_var <= f64::MIN_POSITIVE {
        return Err(GarchError::ConstraintInfeasible(
            "residual variance is zero; the series has no volatility to model".into(),
        ));
    }
    let phi_se = (resid_var / sxx).sqrt();

    // θ = [z, ln α0, logit(α1 + β1), logit(α1 / (α1 + β1))], φ = φ_ols + z·se
    let unpack = |theta: &[f64]| {
        let persistence = logistic(theta[2]);
        let share = logistic(theta[3]);
        GarchParams {
            phi: phi_ols + theta[0] * phi_se,
            alpha0: theta[1].exp(),
            alpha1: persistence * share,
            beta1: persistence * (1.0 - share),
        }
    };
    let objective = |theta: &[f64]| -garch_loglik(&unpack(theta), &y, &x);

    let starts = [(0.05, 0.90), (0.10, 0.80), (0.30, 0.40)];
    let step = [1.0, 0.5, 0.5, 0.5];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (a1, b1) in starts {
        let s: f64 = a1 + b1;
        let theta0 = [0.0, (resid_var * (1.0 - s)).ln(), logit(s), logit(a1 / s)];
        let r = nelder_mead(objective, &theta0, &step, cfg.optimizer);
        if best.as_ref().is_none_or(|(_, f)| r.f < *f) {
            best = Some((r.x, r.f));
        }
    }
    let (mut theta, mut f) = best.expect("at least one start");
    // restart from the incumbent until the simplex stops finding improvements
    for _ in 0..3 {
        let r = nelder_mead(objective, &theta, &[0.1; 4], cfg.optimizer);
        let improved = r.f < f - 1e-9 * (1.0 + f.abs());
        if r.f < f {
            theta = r.x;
            f = r.f;
        }
        if !improved {
            break;
        }
    }

    let params = unpack(&theta);
    if !f.is_finite() {
        return Err(GarchError::OptimizerDiverged(
            "log-likelihood is not finite at the optimum".into(),
        ));
    }
    params
        .validate()
        .map_err(|e| GarchError::OptimizerDiverged(e.to_string()))?;

    let mu = residuals(params.phi, &y, &x);
    let sigma2 = conditional_variance(&params, &mu);
    if sigma2.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(GarchError::OptimizerDiverged("non-positive conditional variance".into()));
    }
    let loglik = loglik_from(&mu, &sigma2);
    Ok(GarchFit {
        params,
        mean: cfg.mean,
        loglik,
        lead,
        n_input: prices.len(),
        mu,
        sigma2,
    })
}

/// μ_t and σ²_t aligned with the dates of the fitted series; the first
/// `fit.lead` dates have no value.
pub fn garch_attributes(fit: &GarchFit) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let pad = |series: &[f64]| {
        std::iter::repeat_n(None, fit.lead)
            .chain(series.iter().copied().map(Some))
            .collect::<Vec<_>>()
    };
    (pad(&fit.mu), pad(&fit.sigma2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchPath {
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Draws a sample path of length `n`, starting from `y = 0` at the
/// unconditional variance. Deterministic for a fixed seed.
pub fn simulate_garch_path(params: &GarchParams, n: usize, seed: u64) -> Result<GarchPath> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    let mut prev_y = 0.0;
    let mut prev_mu = 0.0;
    let mut prev_s2 = params.unconditional_variance();
    for t in 0..n {
        let s2 = if t == 0 {
            prev_s2
        } else {
            params.alpha0 + params.alpha1 * prev_mu * prev_mu + params.beta1 * prev_s2
        };
        let z: f64 = StandardNormal.sample(&mut rng);
        let shock = s2.sqrt() * z;
        let value = params.phi * prev_y + shock;
        y.push(value);
        mu.push(shock);
        sigma2.push(s2);
        prev_y = value;
        prev_mu = shock;
        prev_s2 = s2;
    }
    Ok(GarchPath { y, mu, sigma2 })
}

pub fn simulate_garch(params: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(simulate_garch_path(params, n, seed)?.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> GarchParams {
        GarchParams::new(0.0, 0.1, 0.2, 0.7)
    }

    #[test]
    fn one_step_recursion() {
        let p = truth();
        let s2 = p.alpha0 + p.alpha1 * 0.5 * 0.5 + p.beta1 * 1.0;
        assert!((s2 - 0.85).abs() < 1e-12);
        // through the public recursion: mu = [0.5, x], sigma2[0] = var(mu) = 1
        let mu = [0.5, 2.5];
        assert_eq!(population_variance(&mu), 1.0);
        let sigma2 = conditional_variance(&p, &mu);
        assert!((sigma2[1] - 0.85).abs() < 1e-12);
    }

    #[test]
    fn constant_prices_have_zero_residual_with_unit_phi() {
        let (y, x, _) = mean_equation_data(&[5.0; 10], MeanModel::LaggedPrice).unwrap();
        assert!(residuals(1.0, &y, &x).iter().all(|m| *m == 0.0));
    }

    #[test]
    fn constant_prices_are_degenerate() {
        let err = fit_garch11(&[42.0; 200]).unwrap_err();
        assert!(matches!(
            err,
            GarchError::ConstraintInfeasible(_) | GarchError::OptimizerDiverged(_)
        ));
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            fit_garch11(&[1.0; 50]),
            Err(GarchError::SeriesTooShort { needed: 100, got: 50 })
        ));
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_garch(&truth(), 500, 9).unwrap();
        let b = simulate_garch(&truth(), 500, 9).unwrap();
        let c = simulate_garch(&truth(), 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn simulation_rejects_explosive_params() {
        let p = GarchParams::new(0.0, 0.1, 0.5, 0.5);
        assert!(matches!(
            simulate_garch(&p, 10, 0),
            Err(GarchError::ConstraintInfeasible(_))
        ));
    }

    #[test]
    fn arch_free_simulation_has_constant_variance() {
        let p = GarchParams::new(0.0, 0.3, 0.0, 0.0);
        let path = simulate_garch_path(&p, 20_000, 1).unwrap();
        assert!(path.sigma2.iter().all(|s| *s == 0.3));
        let v = population_variance(&path.y);
        assert!((v - 0.3).abs() < 0.02, "{v}");
    }

    #[test]
    fn simulated_unconditional_variance() {
        let path = simulate_garch_path(&truth(), 5000, 3).unwrap();
        let v = population_variance(&path.y);
        assert!((v - 1.0).abs() < 0.2, "{v}");
    }

    #[test]
    fn recovers_simulated_parameters() {
        let y = simulate_garch(&truth(), 5000, 21).unwrap();
        let fit = fit_garch11(&y).unwrap();
        let p = fit.params;
        assert!((p.alpha0 - 0.1).abs() < 0.1, "{p:?}");
        assert!((p.alpha1 - 0.2).abs() < 0.1, "{p:?}");
        assert!((p.beta1 - 0.7).abs() < 0.1, "{p:?}");
        assert!(p.phi.abs() < 0.1, "{p:?}");
    }

    #[test]
    fn white_noise_shows_no_arch_effect() {
        for seed in 0..3 {
            let p = GarchParams::new(0.0, 1.0, 0.0, 0.0);
            let y = simulate_garch(&p, 3000, 100 + seed).unwrap();
            let fit = fit_garch11(&y).unwrap();
            assert!(fit.params.alpha1 < 0.1, "{:?}", fit.params);
        }
    }

    #[test]
    fn fit_beats_constraint_grid() {
        let y = simulate_garch(&truth(), 3000, 4).unwrap();
        let fit = fit_garch11(&y).unwrap();
        let (ys, xs, _) = mean_equation_data_unchecked(&y);
        let a0_grid = [0.02, 0.06, 0.1, 0.2, 0.4];
        let a1_grid = [0.05, 0.15, 0.25, 0.35, 0.45];
        let b1_grid = [0.1, 0.3, 0.5, 0.7, 0.9];
        for &a0 in &a0_grid {
            for &a1 in &a1_grid {
                for &b1 in &b1_grid {
                    let p = GarchParams::new(fit.params.phi, a0, a1, b1);
                    if p.validate().is_err() {
                        continue;
                    }
                    assert!(fit.loglik >= garch_loglik(&p, &ys, &xs), "{p:?}");
                }
            }
        }
    }

    fn mean_equation_data_unchecked(y: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
        (y[1..].to_vec(), y[..y.len() - 1].to_vec(), 1)
    }

    #[test]
    fn recursion_residual_is_tiny() {
        let y = simulate_garch(&truth(), 2000, 8).unwrap();
        let fit = fit_garch11(&y).unwrap();
        let p = fit.params;
        let max_resid = (1..fit.mu.len())
            .map(|t| {
                let want = p.alpha0 + p.alpha1 * fit.mu[t - 1].powi(2) + p.beta1 * fit.sigma2[t - 1];
                (fit.sigma2[t] - want).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_resid < 1e-10);
    }

    #[test]
    fn attributes_are_aligned() {
        let prices: Vec<f64> = simulate_garch(&truth(), 300, 2)
            .unwrap()
            .iter()
            .scan(100.0, |p, r| {
                *p *= 1.0 + 0.01 * r;
                Some(*p)
            })
            .collect();
        for mean in [MeanModel::LaggedPrice, MeanModel::LaggedReturn] {
            let cfg = GarchConfig {
                mean,
                ..Default::default()
            };
            let fit = fit_garch11_with(&prices, &cfg).unwrap();
            let (mu, s2) = garch_attributes(&fit);
            assert_eq!(mu.len(), prices.len());
            assert_eq!(s2.len(), prices.len());
            assert!(mu[..fit.lead].iter().all(Option::is_none));
            assert!(s2[fit.lead..].iter().all(|v| v.unwrap() > 0.0));
        }
    }

    #[test]
    fn json_record_round_trip() {
        let y = simulate_garch(&truth(), 400, 1).unwrap();
        let fit = fit_garch11(&y).unwrap();
        let back = GarchFit::from_json(&fit.to_json()).unwrap();
        assert_eq!(back.params, fit.params);
        assert_eq!(back.loglik, fit.loglik);
    }
}
