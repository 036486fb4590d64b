use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::BacktestReport;
use super::train::{train_global, training_rng, Hyper, TrainedModel};
use super::window::{make_windows, Window};
use super::{PipelineError, Result};
use crate::indicators::FeatureMatrix;
use crate::nn::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardConfig {
    /// Feature rows observed before the first trade.
    pub warmup_days: usize,
    /// Incremental epochs after each new day; 0 freezes the warm-up model.
    pub retrain_epochs: usize,
    /// How many of the newest windows each incremental pass trains on.
    pub retrain_span: usize,
    pub window_length: usize,
    pub seed: u64,
    pub initial_capital: f64,
}

impl Default for WalkForwardConfig {
    fn default() -> Self {
        Self {
            warmup_days: 300,
            retrain_epochs: 5,
            retrain_span: 300,
            window_length: 30,
            seed: 0,
            initial_capital: 1000.0,
        }
    }
}

/// Anything that can be trained on past windows and score the next one.
pub trait Forecaster {
    /// Initial fit on the warm-up history.
    fn warm_up(&mut self, history: &[Window]) -> Result<()>;
    /// Called after each prediction with the grown history.
    fn update(&mut self, history: &[Window]) -> Result<()>;
    fn predict(&mut self, window: &Window) -> Result<f64>;
}

/// Day-by-day loop. The score for the window ending at row `t` is produced
/// from windows ending at or before `t − 1` (whose targets are known by
/// day `t`), and only then is window `t` added to the history.
pub fn walk_forward_with<F: Forecaster>(
    features: &FeatureMatrix,
    cfg: &WalkForwardConfig,
    forecaster: &mut F,
) -> Result<BacktestReport> {
    let steps = cfg.window_length;
    if steps == 0 || cfg.warmup_days < steps {
        return Err(PipelineError::InvalidConfig(format!(
            "warm-up of {} days is shorter than the {steps}-day window",
            cfg.warmup_days
        )));
    }
    let rows = features.rows();
    if rows < cfg.warmup_days {
        return Err(PipelineError::TooShortHistory {
            rows,
            warmup: cfg.warmup_days,
        });
    }
    let windows = if rows > steps {
        make_windows(features, steps)?.windows
    } else {
        Vec::new()
    };
    // windows[k] ends at row k + steps − 1; the first trade is scored at
    // the end of the warm-up, row warmup − 1
    let first = cfg.warmup_days - steps;
    forecaster.warm_up(&windows[..first.min(windows.len())])?;

    let (mut dates, mut scores, mut realized) = (Vec::new(), Vec::new(), Vec::new());
    for k in first..windows.len() {
        let w = &windows[k];
        scores.push(forecaster.predict(w)?);
        dates.push(features.dates()[w.end_row + 1]);
        realized.push(w.target);
        if k + 1 < windows.len() {
            forecaster.update(&windows[..=k])?;
        }
    }
    let start = windows.get(first).map(|w| w.end_date);
    Ok(BacktestReport::new(start, &dates, &scores, &realized, cfg.initial_capital))
}

/// The recurrent network as a [`Forecaster`].
#[derive(Debug, Clone)]
pub struct NetworkForecaster {
    pub variant: Variant,
    pub hyper: Hyper,
    pub steps: usize,
    pub retrain_epochs: usize,
    pub retrain_span: usize,
    pub seed: u64,
    pub model: Option<TrainedModel>,
    pub warmup_loss: Vec<f64>,
    rng: ChaCha8Rng,
}

impl NetworkForecaster {
    pub fn new(variant: Variant, hyper: Hyper, cfg: &WalkForwardConfig) -> Self {
        Self {
            variant,
            hyper,
            steps: cfg.window_length,
            retrain_epochs: cfg.retrain_epochs,
            retrain_span: cfg.retrain_span,
            seed: cfg.seed,
            model: None,
            warmup_loss: Vec::new(),
            rng: training_rng(cfg.seed.wrapping_add(1)),
        }
    }

    fn model(&mut self) -> Result<&mut TrainedModel> {
        self.model
            .as_mut()
            .ok_or_else(|| PipelineError::InvalidConfig("forecaster used before warm-up".into()))
    }
}

impl Forecaster for NetworkForecaster {
    fn warm_up(&mut self, history: &[Window]) -> Result<()> {
        let (model, curve) = train_global(history, self.steps, self.variant, &self.hyper, self.seed)?;
        self.model = Some(model);
        self.warmup_loss = curve;
        Ok(())
    }

    fn update(&mut self, history: &[Window]) -> Result<()> {
        if self.retrain_epochs == 0 {
            return Ok(());
        }
        let epochs = self.retrain_epochs;
        let recent = &history[history.len().saturating_sub(self.retrain_span)..];
        let mut rng = self.rng.clone();
        self.model()?.retrain(history, recent, epochs, &mut rng)?;
        self.rng = rng;
        Ok(())
    }

    fn predict(&mut self, window: &Window) -> Result<f64> {
        self.model()?.predict(window)
    }
}

#[derive(Debug, Clone)]
pub struct WalkForwardOutcome {
    pub report: BacktestReport,
    /// The model after the last incremental update.
    pub model: TrainedModel,
    pub warmup_loss: Vec<f64>,
}

/// Walk-forward run of a freshly initialised network.
pub fn walk_forward(
    features: &FeatureMatrix,
    cfg: &WalkForwardConfig,
    variant: Variant,
    hyper: &Hyper,
) -> Result<WalkForwardOutcome> {
    let mut f = NetworkForecaster::new(variant, *hyper, cfg);
    let report = walk_forward_with(features, cfg, &mut f)?;
    Ok(WalkForwardOutcome {
        report,
        model: f.model.expect("warm-up ran"),
        warmup_loss: f.warmup_loss,
    })
}
