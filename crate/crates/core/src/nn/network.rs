//! The three forecaster variants and their forward/backward passes.
//!
//! Wiring, per window of `steps × input` features:
//!
//! ```text
//! layer1 (LSTM or BiLSTM) → batch norm per time step → dropout
//!   → layer2 (LSTM or BiLSTM) → [attention, At-BiLSTM only] → dense → score
//! ```
//!
//! The attention query is the final hidden state of layer2 (for a
//! bidirectional layer: the forward cell's last output joined with the
//! backward cell's output at step 0). The head sees `[context, query]` for
//! At-BiLSTM and the query alone otherwise.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{attention_backward, attention_forward};
use super::batchnorm::{batch_norm, batch_norm_backward, BnCache, RunningStats};
use super::dropout::dropout;
use super::lstm::{layer_backward, layer_forward, LayerCache, RecurrentLayer};
use super::tensor::Tensor;
use super::{Mode, NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Lstm,
    BiLstm,
    AtBiLstm,
}

impl Variant {
    pub fn bidirectional(self) -> bool {
        !matches!(self, Variant::Lstm)
    }

    pub fn attention(self) -> bool {
        matches!(self, Variant::AtBiLstm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lstm => "lstm",
            Variant::BiLstm => "bilstm",
            Variant::AtBiLstm => "at-bilstm",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Variant::Lstm => 0,
            Variant::BiLstm => 1,
            Variant::AtBiLstm => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Variant::Lstm),
            1 => Some(Variant::BiLstm),
            2 => Some(Variant::AtBiLstm),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "lstm" => Ok(Variant::Lstm),
            "bilstm" | "bi-lstm" => Ok(Variant::BiLstm),
            "at-bilstm" | "atbilstm" | "at-bi-lstm" => Ok(Variant::AtBiLstm),
            other => Err(format!("unknown variant '{other}' (lstm, bilstm, at-bilstm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub variant: Variant,
    pub input_dim: usize,
    /// Units per direction.
    pub hidden: usize,
    /// Window length the batch-norm statistics are kept for.
    pub steps: usize,
    pub dropout_rate: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl NetworkConfig {
    pub fn new(variant: Variant, input_dim: usize, hidden: usize, steps: usize) -> Self {
        Self {
            variant,
            input_dim,
            hidden,
            steps,
            dropout_rate: 0.2,
            bn_eps: 1e-5,
            bn_momentum: 0.99,
        }
    }

    pub fn layer_width(&self) -> usize {
        self.hidden * if self.variant.bidirectional() { 2 } else { 1 }
    }

    pub fn head_width(&self) -> usize {
        self.layer_width() * if self.variant.attention() { 2 } else { 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.steps == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "degenerate network dimensions {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::InvalidRate(self.dropout_rate));
        }
        Ok(())
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub layer1: RecurrentLayer,
    pub layer2: RecurrentLayer,
    pub bn_gamma: Tensor,
    pub bn_beta: Tensor,
    pub head_w: Tensor,
    pub head_b: Tensor,
}

impl Weights {
    fn zeros(cfg: &NetworkConfig) -> Self {
        let bi = cfg.variant.bidirectional();
        let width = cfg.layer_width();
        Self {
            layer1: RecurrentLayer::zeros(cfg.input_dim, cfg.hidden, bi),
            layer2: RecurrentLayer::zeros(width, cfg.hidden, bi),
            bn_gamma: Tensor::zeros(&[width]),
            bn_beta: Tensor::zeros(&[width]),
            head_w: Tensor::zeros(&[cfg.head_width()]),
            head_b: Tensor::zeros(&[1]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().for_each(|t| t.fill(0.0));
        z
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layer1
            .tensors()
            .chain(self.layer2.tensors())
            .chain([&self.bn_gamma, &self.bn_beta, &self.head_w, &self.head_b])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layer1.tensors_mut().chain(self.layer2.tensors_mut()).chain([
            &mut self.bn_gamma,
            &mut self.bn_beta,
            &mut self.head_w,
            &mut self.head_b,
        ])
    }

    /// Names parallel to [`Weights::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let cell_names = |prefix: &str, names: &mut Vec<String>| {
            for kind in ["w", "u", "b"] {
                for gate in ["f", "i", "o", "c"] {
                    names.push(format!("{prefix}.{kind}_{gate}"));
                }
            }
        };
        for (layer, name) in [(&self.layer1, "layer1"), (&self.layer2, "layer2")] {
            cell_names(&format!("{name}.fwd"), &mut names);
            if layer.backward.is_some() {
                cell_names(&format!("{name}.bwd"), &mut names);
            }
        }
        names.extend(["bn.gamma", "bn.beta", "head.w", "head.b"].map(String::from));
        names
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub weights: Weights,
    /// Per time step and feature, shape `steps × layer_width`.
    pub bn_running: RunningStats,
    /// Bumped on every weight update; caches remember the value they saw.
    pub version: u64,
}

impl NetworkParams {
    /// Glorot-initialised weights, γ = 1, β = 0.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bi = config.variant.bidirectional();
        let width = config.layer_width();
        let head = config.head_width();
        let weights = Weights {
            layer1: RecurrentLayer::init(config.input_dim, config.hidden, bi, &mut rng),
            layer2: RecurrentLayer::init(width, config.hidden, bi, &mut rng),
            bn_gamma: Tensor::filled(&[width], 1.0),
            bn_beta: Tensor::zeros(&[width]),
            head_w: Tensor::glorot(&[head], head, 1, &mut rng),
            head_b: Tensor::zeros(&[1]),
        };
        Ok(Self {
            config,
            weights,
            bn_running: RunningStats::new(&[config.steps, width]),
            version: 0,
        })
    }

    /// Every trainable value zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            weights: Weights::zeros(&config),
            bn_running: RunningStats::new(&[config.steps, config.layer_width()]),
            version: 0,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Folds the batch statistics of a training forward pass into the
    /// running estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let momentum = self.config.bn_momentum;
        let width = self.config.layer_width();
        for (t, bn) in cache.bn.iter().enumerate() {
            let Some(bn) = bn else { continue };
            let mean = &mut self.bn_running.mean.data_mut()[t * width..(t + 1) * width];
            for (r, b) in mean.iter_mut().zip(&bn.batch_mean) {
                *r = momentum * *r + (1.0 - momentum) * b;
            }
            let var = &mut self.bn_running.var.data_mut()[t * width..(t + 1) * width];
            for (r, b) in var.iter_mut().zip(&bn.batch_var) {
                *r = momentum * *r + (1.0 - momentum) * b;
            }
        }
    }
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug)]
pub struct ForwardCache {
    version: u64,
    mode: Mode,
    layer1: Vec<LayerCache>,
    bn: Vec<Option<BnCache>>,
    masks: Vec<Vec<f64>>,
    layer2: Vec<LayerCache>,
    layer2_out: Vec<Vec<f64>>,
    query: Vec<Vec<f64>>,
    attention: Vec<Vec<f64>>,
    head_in: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Attention weights per sample (empty for variants without attention).
    pub fn attention_weights(&self) -> &[Vec<f64>] {
        &self.attention
    }
}

fn final_state(seq: &[f64], steps: usize, hidden: usize, bidirectional: bool) -> Vec<f64> {
    let width = seq.len() / steps;
    let last = &seq[(steps - 1) * width..steps * width];
    if bidirectional {
        let mut q = last[..hidden].to_vec();
        q.extend_from_slice(&seq[hidden..2 * hidden]);
        q
    } else {
        last.to_vec()
    }
}

/// Scores a batch of windows, each `steps × input_dim` row-major.
///
/// Dropout masks are drawn from `seed`, so the call is a pure function of
/// its arguments.
pub fn forward(
    params: &NetworkParams,
    windows: &[&[f64]],
    mode: Mode,
    seed: u64,
) -> Result<(Vec<f64>, ForwardCache)> {
    let cfg = &params.config;
    let w = &params.weights;
    let (steps, hidden) = (cfg.steps, cfg.hidden);
    let width = cfg.layer_width();
    let batch = windows.len();
    if batch == 0 {
        return Err(NnError::ShapeMismatch("empty batch".into()));
    }
    if let Some(bad) = windows.iter().find(|x| x.len() != steps * cfg.input_dim) {
        return Err(NnError::ShapeMismatch(format!(
            "window of {} values, expected {steps} × {}",
            bad.len(),
            cfg.input_dim
        )));
    }

    let mut out1 = Vec::with_capacity(batch);
    let mut layer1 = Vec::with_capacity(batch);
    for x in windows {
        let (o, c) = layer_forward(&w.layer1, x, steps)?;
        out1.push(o);
        layer1.push(c);
    }

    let mut normed = vec![vec![0.0; steps * width]; batch];
    let mut bn = Vec::with_capacity(steps);
    let mut block = vec![0.0; batch * width];
    for t in 0..steps {
        for (b, o) in out1.iter().enumerate() {
            block[b * width..(b + 1) * width].copy_from_slice(&o[t * width..(t + 1) * width]);
        }
        let (y, cache) = batch_norm(
            &block,
            batch,
            w.bn_gamma.data(),
            w.bn_beta.data(),
            &params.bn_running.mean.data()[t * width..(t + 1) * width],
            &params.bn_running.var.data()[t * width..(t + 1) * width],
            mode,
            cfg.bn_eps,
        )?;
        for (b, n) in normed.iter_mut().enumerate() {
            n[t * width..(t + 1) * width].copy_from_slice(&y[b * width..(b + 1) * width]);
        }
        bn.push(cache);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(batch);
    let mut masks = Vec::with_capacity(batch);
    let mut layer2 = Vec::with_capacity(batch);
    let mut layer2_out = Vec::with_capacity(batch);
    let mut queries = Vec::with_capacity(batch);
    let mut attention = Vec::new();
    let mut head_in = Vec::with_capacity(batch);
    for n in &normed {
        let (dropped, mask) = dropout(n, cfg.dropout_rate, mode, &mut rng)?;
        let (o2, c2) = layer_forward(&w.layer2, &dropped, steps)?;
        let q = final_state(&o2, steps, hidden, cfg.variant.bidirectional());
        let z = if cfg.variant.attention() {
            let (mut ctx, weights) = attention_forward(&o2, &q)?;
            attention.push(weights);
            ctx.extend_from_slice(&q);
            ctx
        } else {
            q.clone()
        };
        let score = w.head_b.data()[0]
            + w.head_w.data().iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        if !score.is_finite() {
            return Err(NnError::NonFinite("network output".into()));
        }
        scores.push(score);
        masks.push(mask);
        layer2.push(c2);
        layer2_out.push(o2);
        queries.push(q);
        head_in.push(z);
    }

    Ok((
        scores,
        ForwardCache {
            version: params.version,
            mode,
            layer1,
            bn,
            masks,
            layer2,
            layer2_out,
            query: queries,
            attention,
            head_in,
        },
    ))
}

/// Inference-mode score of a single window.
pub fn predict(params: &NetworkParams, window: &[f64]) -> Result<f64> {
    Ok(forward(params, &[window], Mode::Infer, 0)?.0[0])
}

/// Mean squared error and its gradient with respect to each score.
pub fn mse_loss(scores: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = scores.len() as f64;
    let loss = scores
        .iter()
        .zip(targets)
        .map(|(s, y)| (s - y) * (s - y))
        .sum::<f64>()
        / n;
    let grad = scores
        .iter()
        .zip(targets)
        .map(|(s, y)| 2.0 * (s - y) / n)
        .collect();
    (loss, grad)
}

/// Gradients of `Σ_b loss_grad[b] · score_b` with respect to every weight.
///
/// The cache must come from a training-mode [`forward`] on the same,
/// unmodified parameters.
pub fn backward(params: &NetworkParams, cache: ForwardCache, loss_grad: &[f64]) -> Result<Weights> {
    if cache.version != params.version || cache.mode != Mode::Train {
        return Err(NnError::StaleCache);
    }
    let batch = cache.layer1.len();
    if loss_grad.len() != batch {
        return Err(NnError::ShapeMismatch(format!(
            "{} loss gradients for a batch of {batch}",
            loss_grad.len()
        )));
    }
    let cfg = &params.config;
    let w = &params.weights;
    let (steps, hidden) = (cfg.steps, cfg.hidden);
    let width = cfg.layer_width();
    let bi = cfg.variant.bidirectional();
    let mut grads = w.zeros_like();

    let mut d_normed = Vec::with_capacity(batch);
    for b in 0..batch {
        let g = loss_grad[b];
        grads.head_b.data_mut()[0] += g;
        for (dw, z) in grads.head_w.data_mut().iter_mut().zip(&cache.head_in[b]) {
            *dw += g * z;
        }
        let dz: Vec<f64> = w.head_w.data().iter().map(|v| g * v).collect();

        let mut d_out2 = vec![0.0; steps * width];
        let mut dq = if cfg.variant.attention() {
            let (dh, dq_att) = attention_backward(
                &cache.layer2_out[b],
                &cache.query[b],
                &cache.attention[b],
                &dz[..width],
            );
            d_out2.copy_from_slice(&dh);
            dq_att
                .iter()
                .zip(&dz[width..])
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>()
        } else {
            dz
        };
        let last = (steps - 1) * width;
        if bi {
            for k in 0..hidden {
                d_out2[last + k] += dq[k];
                d_out2[hidden + k] += dq[hidden + k];
            }
        } else {
            for k in 0..width {
                d_out2[last + k] += dq[k];
            }
        }
        dq.clear();

        let mut d_in2 = layer_backward(&w.layer2, &cache.layer2[b], &d_out2, &mut grads.layer2);
        for (d, m) in d_in2.iter_mut().zip(&cache.masks[b]) {
            *d *= m;
        }
        d_normed.push(d_in2);
    }

    let mut d_out1 = vec![vec![0.0; steps * width]; batch];
    let mut dy = vec![0.0; batch * width];
    for t in 0..steps {
        let bn = cache.bn[t].as_ref().ok_or(NnError::StaleCache)?;
        for (b, dn) in d_normed.iter().enumerate() {
            dy[b * width..(b + 1) * width].copy_from_slice(&dn[t * width..(t + 1) * width]);
        }
        let dx = batch_norm_backward(
            bn,
            w.bn_gamma.data(),
            &dy,
            grads.bn_gamma.data_mut(),
            grads.bn_beta.data_mut(),
        );
        for (b, d) in d_out1.iter_mut().enumerate() {
            d[t * width..(t + 1) * width].copy_from_slice(&dx[b * width..(b + 1) * width]);
        }
    }

    for b in 0..batch {
        layer_backward(&w.layer1, &cache.layer1[b], &d_out1[b], &mut grads.layer1);
    }
    if !grads.is_finite() {
        return Err(NnError::NonFinite("gradients".into()));
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn windows(batch: usize, steps: usize, d: usize) -> Vec<Vec<f64>> {
        (0..batch)
            .map(|b| {
                (0..steps * d)
                    .map(|i| ((b * 31 + i * 7) as f64 * 0.37).sin())
                    .collect()
            })
            .collect()
    }

    fn refs(w: &[Vec<f64>]) -> Vec<&[f64]> {
        w.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn zero_parameters_score_is_head_bias() {
        for variant in [Variant::Lstm, Variant::BiLstm, Variant::AtBiLstm] {
            let mut p = NetworkParams::zeros(NetworkConfig::new(variant, 3, 4, 5)).unwrap();
            p.weights.head_b.data_mut()[0] = 0.37;
            let w = windows(3, 5, 3);
            let (s, _) = forward(&p, &refs(&w), Mode::Train, 1).unwrap();
            assert!(s.iter().all(|v| *v == 0.37));
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let p = NetworkParams::init(NetworkConfig::new(Variant::AtBiLstm, 3, 4, 5), 9).unwrap();
        let w = windows(4, 5, 3);
        let a = forward(&p, &refs(&w), Mode::Train, 5).unwrap().0;
        let b = forward(&p, &refs(&w), Mode::Train, 5).unwrap().0;
        assert_eq!(a, b);
        let c = forward(&p, &refs(&w), Mode::Train, 6).unwrap().0;
        assert_ne!(a, c, "dropout masks should depend on the seed");
    }

    #[test]
    fn attention_weights_sum_to_one() {
        let p = NetworkParams::init(NetworkConfig::new(Variant::AtBiLstm, 3, 4, 6), 2).unwrap();
        let w = windows(5, 6, 3);
        let (_, cache) = forward(&p, &refs(&w), Mode::Train, 0).unwrap();
        assert_eq!(cache.attention_weights().len(), 5);
        for ws in cache.attention_weights() {
            assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_window_shape() {
        let p = NetworkParams::init(NetworkConfig::new(Variant::Lstm, 3, 4, 5), 0).unwrap();
        let err = forward(&p, &[&[0.0; 14]], Mode::Infer, 0).unwrap_err();
        assert!(matches!(err, NnError::ShapeMismatch(_)));
    }

    #[test]
    fn perfect_prediction_gives_zero_gradients() {
        let p = NetworkParams::init(NetworkConfig::new(Variant::AtBiLstm, 3, 4, 5), 4).unwrap();
        let w = windows(4, 5, 3);
        let (scores, cache) = forward(&p, &refs(&w), Mode::Train, 0).unwrap();
        let (loss, grad) = mse_loss(&scores, &scores);
        assert_eq!(loss, 0.0);
        let g = backward(&p, cache, &grad).unwrap();
        assert!(g.tensors().all(|t| t.data().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn cache_goes_stale_after_update() {
        let mut p = NetworkParams::init(NetworkConfig::new(Variant::Lstm, 3, 4, 5), 4).unwrap();
        let w = windows(2, 5, 3);
        let (_, cache) = forward(&p, &refs(&w), Mode::Train, 0).unwrap();
        p.version += 1;
        assert_eq!(backward(&p, cache, &[1.0, 1.0]).unwrap_err(), NnError::StaleCache);
        let (_, infer_cache) = forward(&p, &refs(&w), Mode::Infer, 0).unwrap();
        assert_eq!(backward(&p, infer_cache, &[1.0, 1.0]).unwrap_err(), NnError::StaleCache);
    }

    #[test]
    fn running_stats_move_towards_batch() {
        let mut p = NetworkParams::init(NetworkConfig::new(Variant::Lstm, 3, 4, 5), 4).unwrap();
        let w = windows(6, 5, 3);
        let (_, cache) = forward(&p, &refs(&w), Mode::Train, 0).unwrap();
        let before = p.bn_running.clone();
        p.update_running_stats(&cache);
        assert_ne!(before, p.bn_running);
    }

    #[test]
    fn tensor_names_line_up() {
        for variant in [Variant::Lstm, Variant::AtBiLstm] {
            let p = NetworkParams::init(NetworkConfig::new(variant, 3, 4, 5), 0).unwrap();
            assert_eq!(p.weights.tensor_names().len(), p.weights.tensors().count());
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("at-bilstm".parse::<Variant>().unwrap(), Variant::AtBiLstm);
        assert_eq!("BiLSTM".parse::<Variant>().unwrap(), Variant::BiLstm);
        assert!("gru".parse::<Variant>().is_err());
    }
}
