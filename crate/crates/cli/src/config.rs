//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Command-line settings override the file, which overrides the
//! built-in defaults (hyperparameters default to the row for the chosen
//! variant).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pricecast_core::garch::MeanModel;
use pricecast_core::indicators::{IndicatorConfig, ReturnConvention};
use pricecast_core::nn::Variant;
use pricecast_core::pipeline::{Hyper, WalkForwardConfig};
use pricecast_core::timeseries::{Asset, DEFAULT_LAGRANGE_WINDOW};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "asset",
    "gold",
    "bitcoin",
    "input",
    "variant",
    "window",
    "warmup",
    "retrain_epochs",
    "retrain_span",
    "initial_capital",
    "seed",
    "out",
    "hidden",
    "batch_size",
    "lr",
    "epochs",
    "dropout",
    "train_fraction",
    "lagrange_window",
    "adf_lags",
    "adf_series",
    "garch_mean",
    "return_convention",
    "var_short",
    "var_long",
    "ma_short",
    "ma_long",
    "boll_window",
    "psy_window",
    "rsi_window",
];

/// Which series the stationarity check runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdfSeries {
    Returns,
    Prices,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub asset: Asset,
    pub gold: Option<PathBuf>,
    pub bitcoin: Option<PathBuf>,
    pub variant: Variant,
    pub indicators: IndicatorConfig,
    pub garch_mean: MeanModel,
    pub lagrange_window: usize,
    pub adf_lags: usize,
    pub adf_series: AdfSeries,
    pub walk: WalkForwardConfig,
    pub hyper: Hyper,
    /// Share of windows used by `train`; the rest is the held-out set.
    pub train_fraction: f64,
    pub out: PathBuf,
    pub seed: u64,
}

/// Parses the text of a config file into raw key/value pairs.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim().replace('-', "_");
        if !KEYS.contains(&k.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(map)
}

fn take<T>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| CliError::Config(format!("{key} = {v}: {e}"))),
    }
}

impl RunConfig {
    /// Layers `overrides` over the optional config file.
    pub fn resolve(file: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut map = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                parse_kv(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key '{k}'")));
            }
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let asset: Asset = take(map, "asset", Asset::Gold)?;
        let variant: Variant = take(map, "variant", Variant::AtBiLstm)?;
        let seed: u64 = match map.get("seed") {
            Some(_) => take(map, "seed", 0)?,
            None => return Err(CliError::Config("a seed is required (--seed or seed = ...)".into())),
        };
        let mut gold = map.get("gold").map(PathBuf::from);
        let mut bitcoin = map.get("bitcoin").map(PathBuf::from);
        if let Some(input) = map.get("input") {
            match asset {
                Asset::Gold => gold = Some(input.into()),
                Asset::Bitcoin => bitcoin = Some(input.into()),
            }
        }

        let table = Hyper::table(variant);
        let hyper = Hyper {
            hidden: take(map, "hidden", table.hidden)?,
            batch_size: take(map, "batch_size", table.batch_size)?,
            lr: take(map, "lr", table.lr)?,
            epochs: take(map, "epochs", table.epochs)?,
            dropout: take(map, "dropout", table.dropout)?,
        };
        let base = WalkForwardConfig::default();
        let walk = WalkForwardConfig {
            warmup_days: take(map, "warmup", base.warmup_days)?,
            retrain_epochs: take(map, "retrain_epochs", base.retrain_epochs)?,
            retrain_span: take(map, "retrain_span", base.retrain_span)?,
            window_length: take(map, "window", base.window_length)?,
            seed,
            initial_capital: take(map, "initial_capital", base.initial_capital)?,
        };
        let ind = IndicatorConfig::default();
        let indicators = IndicatorConfig {
            var_windows: (take(map, "var_short", ind.var_windows.0)?, take(map, "var_long", ind.var_windows.1)?),
            ma_windows: (take(map, "ma_short", ind.ma_windows.0)?, take(map, "ma_long", ind.ma_windows.1)?),
            boll_window: take(map, "boll_window", ind.boll_window)?,
            psy_window: take(map, "psy_window", ind.psy_window)?,
            rsi_window: take(map, "rsi_window", ind.rsi_window)?,
            return_convention: match map.get("return_convention").map(String::as_str) {
                None | Some("current") => ReturnConvention::CurrentPrice,
                Some("previous") => ReturnConvention::PreviousPrice,
                Some(v) => {
                    return Err(CliError::Config(format!("return_convention = {v}: expected current or previous")))
                }
            },
        };
        let garch_mean = match map.get("garch_mean").map(String::as_str) {
            None | Some("lagged_price") => MeanModel::LaggedPrice,
            Some("lagged_return") => MeanModel::LaggedReturn,
            Some(v) => {
                return Err(CliError::Config(format!(
                    "garch_mean = {v}: expected lagged_price or lagged_return"
                )))
            }
        };
        let adf_series = match map.get("adf_series").map(String::as_str) {
            None | Some("returns") => AdfSeries::Returns,
            Some("prices") => AdfSeries::Prices,
            Some(v) => return Err(CliError::Config(format!("adf_series = {v}: expected returns or prices"))),
        };

        let cfg = Self {
            asset,
            gold,
            bitcoin,
            variant,
            indicators,
            garch_mean,
            lagrange_window: take(map, "lagrange_window", DEFAULT_LAGRANGE_WINDOW)?,
            adf_lags: take(map, "adf_lags", 1)?,
            adf_series,
            walk,
            hyper,
            train_fraction: take(map, "train_fraction", 0.8)?,
            out: PathBuf::from(map.get("out").map(String::as_str).unwrap_or("out")),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.walk.window_length == 0 {
            return bad("window must be positive".into());
        }
        if self.walk.warmup_days < self.walk.window_length {
            return bad(format!(
                "warmup ({}) must be at least the window length ({})",
                self.walk.warmup_days, self.walk.window_length
            ));
        }
        if self.hyper.hidden == 0 || self.hyper.batch_size < 2 {
            return bad("hidden must be positive and batch_size at least 2".into());
        }
        if !(self.hyper.lr > 0.0 && self.hyper.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.hyper.lr));
        }
        if !(0.0..1.0).contains(&self.hyper.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.hyper.dropout));
        }
        self.indicators
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn input_path(&self, asset: Asset) -> Option<&Path> {
        match asset {
            Asset::Gold => self.gold.as_deref(),
            Asset::Bitcoin => self.bitcoin.as_deref(),
        }
    }

    fn stem(&self) -> String {
        self.asset.to_string().to_lowercase()
    }

    fn run_stem(&self) -> String {
        format!("{}-{}", self.stem(), self.variant)
    }

    pub fn cleaned_path(&self) -> PathBuf {
        self.out.join("cleaned").join(format!("{}.csv", self.stem()))
    }

    pub fn features_path(&self) -> PathBuf {
        self.out.join("features").join(format!("{}.csv", self.stem()))
    }

    pub fn features_meta_path(&self, what: &str) -> PathBuf {
        self.out.join("features").join(format!("{}-{what}.json", self.stem()))
    }

    pub fn checkpoint_path(&self, kind: &str) -> PathBuf {
        self.out.join("checkpoints").join(format!("{}-{kind}.ckpt", self.run_stem()))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.out.join("reports").join(format!("{}-{name}", self.run_stem()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn variant_selects_its_hyperparameter_row() {
        let cfg = RunConfig::from_map(&kv(&[("seed", "1"), ("variant", "at-bilstm")])).unwrap();
        assert_eq!(cfg.hyper.hidden, 32);
        assert_eq!(cfg.hyper.lr, 0.01);
        let cfg = RunConfig::from_map(&kv(&[("seed", "1"), ("variant", "bilstm")])).unwrap();
        assert_eq!(cfg.hyper.hidden, 64);
        assert_eq!(cfg.hyper.lr, 0.001);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(RunConfig::from_map(&kv(&[])), Err(CliError::Config(_))));
    }

    #[test]
    fn file_parsing() {
        let text = "# run\nseed = 4\n\nwindow=20\nhidden = 8\n";
        let map = parse_kv(text).unwrap();
        assert_eq!(map["window"], "20");
        assert!(parse_kv("nonsense = 1").is_err());
        assert!(parse_kv("seed = 1\nseed = 2").is_err());
        assert!(parse_kv("just text").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 4\nwindow = 20\nhidden = 8\n").unwrap();
        let cfg = RunConfig::resolve(Some(&path), &kv(&[("hidden", "16")])).unwrap();
        assert_eq!(cfg.walk.window_length, 20);
        assert_eq!(cfg.hyper.hidden, 16);
        assert_eq!(cfg.hyper.batch_size, 128);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.walk.seed, 4);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_map(&kv(&[("seed", "x")])).is_err());
        assert!(RunConfig::from_map(&kv(&[("seed", "1"), ("warmup", "10"), ("window", "30")])).is_err());
        assert!(RunConfig::from_map(&kv(&[("seed", "1"), ("dropout", "1.0")])).is_err());
    }
}
