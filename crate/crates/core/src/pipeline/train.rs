use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scaler::Scaler;
use super::window::Window;
use super::{PipelineError, Result};
use crate::nn::{
    backward, forward, mse_loss, predict, rmsprop_step, Checkpoint, Mode, NetworkConfig,
    NetworkParams, NnError, RmsPropConfig, RmsPropState, Variant,
};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Units per direction.
    pub hidden: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub dropout: f64,
}

impl Hyper {
    /// Default per-variant settings. Dropout 0.2 applies to all three.
    pub fn table(variant: Variant) -> Self {
        let (hidden, lr) = match variant {
            Variant::Lstm => (128, 0.01),
            Variant::BiLstm => (64, 0.001),
            Variant::AtBiLstm => (32, 0.01),
        };
        Self {
            hidden,
            batch_size: 128,
            lr,
            epochs: 300,
            dropout: 0.2,
        }
    }
}

/// A trained network with its optimizer state and input scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub optimizer: RmsPropState,
    pub rmsprop: RmsPropConfig,
    pub scaler: Scaler,
    pub batch_size: usize,
}

impl TrainedModel {
    /// Inference-mode score for one unscaled window.
    pub fn predict(&self, window: &Window) -> Result<f64> {
        Ok(predict(&self.params, &self.scaler.transform(&window.data))?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.params.clone());
        ck.optimizer = Some(self.optimizer.clone());
        ck.extras.insert("scaler.mean".into(), self.scaler.mean.clone());
        ck.extras.insert("scaler.std".into(), self.scaler.std.clone());
        ck.extras.insert(
            "scaler.degenerate".into(),
            self.scaler.degenerate.iter().map(|j| *j as f64).collect(),
        );
        ck.extras.insert(
            "train".into(),
            vec![self.rmsprop.lr, self.rmsprop.rho, self.rmsprop.delta, self.batch_size as f64],
        );
        ck
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let get = |k: &str| {
            ck.extras
                .get(k)
                .cloned()
                .ok_or_else(|| NnError::Checkpoint(format!("missing extra '{k}'")))
        };
        let mean = get("scaler.mean")?;
        let std = get("scaler.std")?;
        let degenerate = get("scaler.degenerate")?.iter().map(|j| *j as usize).collect();
        let train = get("train")?;
        if train.len() != 4 || mean.len() != ck.params.config.input_dim || std.len() != mean.len() {
            return Err(NnError::Checkpoint("malformed scaler or training record".into()).into());
        }
        let optimizer = ck
            .optimizer
            .unwrap_or_else(|| RmsPropState::new(&ck.params.weights));
        Ok(Self {
            params: ck.params,
            optimizer,
            rmsprop: RmsPropConfig {
                lr: train[0],
                rho: train[1],
                delta: train[2],
            },
            scaler: Scaler {
                mean,
                std,
                degenerate,
            },
            batch_size: train[3] as usize,
        })
    }

    /// Refits the scaler on `scale_on` and runs `epochs` passes over `train_on`.
    pub(crate) fn retrain(
        &mut self,
        scale_on: &[Window],
        train_on: &[Window],
        epochs: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        self.scaler = Scaler::fit(scale_on, self.scaler.width());
        let inputs: Vec<Vec<f64>> = train_on.iter().map(|w| self.scaler.transform(&w.data)).collect();
        let targets: Vec<f64> = train_on.iter().map(|w| w.target).collect();
        run_epochs(self, &inputs, &targets, epochs, rng)
    }
}

/// Shuffled mini-batches; a trailing batch of one is folded into the one
/// before it because batch norm needs two samples.
fn batches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut out: Vec<Vec<usize>> = idx.chunks(size.max(1)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

fn run_epochs(
    model: &mut TrainedModel,
    inputs: &[Vec<f64>],
    targets: &[f64],
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if inputs.len() < 2 {
        return Err(PipelineError::InvalidConfig(format!(
            "training needs at least 2 windows, got {}",
            inputs.len()
        )));
    }
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut total = 0.0;
        for batch in batches(inputs.len(), model.batch_size, rng) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let (scores, cache) = match forward(&model.params, &xs, Mode::Train, rng.next_u64()) {
                Ok(v) => v,
                Err(NnError::NonFinite(_)) => return Err(PipelineError::NonFiniteLoss { epoch }),
                Err(e) => return Err(e.into()),
            };
            let (loss, grad) = mse_loss(&scores, &ys);
            if !loss.is_finite() {
                return Err(PipelineError::NonFiniteLoss { epoch });
            }
            total += loss * batch.len() as f64;
            model.params.update_running_stats(&cache);
            let grads = match backward(&model.params, cache, &grad) {
                Ok(g) => g,
                Err(NnError::NonFinite(_)) => return Err(PipelineError::NonFiniteLoss { epoch }),
                Err(e) => return Err(e.into()),
            };
            rmsprop_step(&mut model.params, &grads, &mut model.optimizer, &model.rmsprop)?;
        }
        curve.push(total / inputs.len() as f64);
    }
    Ok(curve)
}

pub(crate) fn training_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Mini-batch MSE training with RMSProp from a fresh seeded initialisation.
/// Returns the model and the per-epoch mean training loss.
pub fn train_global(
    windows: &[Window],
    steps: usize,
    variant: Variant,
    hyper: &Hyper,
    seed: u64,
) -> Result<(TrainedModel, Vec<f64>)> {
    let first = windows
        .first()
        .ok_or_else(|| PipelineError::InvalidConfig("no training windows".into()))?;
    if steps == 0 || first.data.len() % steps != 0 {
        return Err(PipelineError::InvalidConfig(format!(
            "window of {} values does not split into {steps} steps",
            first.data.len()
        )));
    }
    let width = first.data.len() / steps;
    let mut config = NetworkConfig::new(variant, width, hyper.hidden, steps);
    config.dropout_rate = hyper.dropout;
    let params = NetworkParams::init(config, seed)?;
    let mut model = TrainedModel {
        optimizer: RmsPropState::new(&params.weights),
        params,
        rmsprop: RmsPropConfig::new(hyper.lr),
        scaler: Scaler::fit(windows, width),
        batch_size: hyper.batch_size,
    };
    let mut rng = training_rng(seed);
    let curve = model.retrain(windows, windows, hyper.epochs, &mut rng)?;
    Ok((model, curve))
}
