use std::fs;
use std::path::Path;

use log::{info, warn};
use pricecast_core::garch::{adf_test, fit_garch11_with, AdfVariant, GarchConfig};
use pricecast_core::indicators::{build_feature_matrix, returns_with, FeatureMatrix};
use pricecast_core::nn::Checkpoint;
use pricecast_core::pipeline::{
    make_windows, train_global, walk_forward, write_loss_curve, BacktestReport, Summary,
    TrainedModel, Window,
};
use pricecast_core::timeseries::{
    align_calendar_with_gaps, lagrange_fill, master_calendar, parse_price_csv, Asset, FillFlag,
    PriceSeries, QuoteFile,
};
use serde_json::json;

use crate::config::{AdfSeries, RunConfig};
use crate::CliError;

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serialises");
    s.push('\n');
    s.into_bytes()
}

fn other(asset: Asset) -> Asset {
    match asset {
        Asset::Gold => Asset::Bitcoin,
        Asset::Bitcoin => Asset::Gold,
    }
}

/// Parses the asset's file, aligns it to the calendar shared with the other
/// asset (when its file is configured), forward-fills absent dates and
/// interpolates rows whose price is missing.
pub fn cmd_clean(cfg: &RunConfig) -> Result<PriceSeries, CliError> {
    let path = cfg
        .input_path(cfg.asset)
        .ok_or_else(|| CliError::Config(format!("no input file configured for {}", cfg.asset)))?;
    let quotes = parse_price_csv(path, cfg.asset)?;
    let partner: Option<QuoteFile> = match cfg.input_path(other(cfg.asset)) {
        Some(p) => Some(parse_price_csv(p, other(cfg.asset))?),
        None => None,
    };
    let mut files = vec![&quotes];
    files.extend(partner.as_ref());
    let calendar = master_calendar(&files);
    let aligned = align_calendar_with_gaps(&quotes.quotes, &quotes.missing_dates(), &calendar)?;
    let cleaned = if aligned.count(FillFlag::Missing) > 0 {
        lagrange_fill(&aligned, cfg.lagrange_window)?
    } else {
        aligned
    };

    let mut buf = Vec::new();
    cleaned
        .write_csv(&mut buf)
        .expect("writing to memory cannot fail");
    let out = cfg.cleaned_path();
    write_file(&out, &buf)?;
    let stats = json!({
        "asset": cfg.asset.to_string().to_lowercase(),
        "rows": cleaned.len(),
        "observed": cleaned.count(FillFlag::Observed),
        "forward_filled": cleaned.count(FillFlag::ForwardFilled),
        "interpolated": cleaned.count(FillFlag::Interpolated),
        "missing_rows": quotes.missing.iter().map(|m| json!({"line": m.line, "date": m.date.to_string()})).collect::<Vec<_>>(),
    });
    write_file(&out.with_file_name(format!("{}-fill.json", cfg.asset.to_string().to_lowercase())), &pretty(&stats))?;
    info!("wrote {}", out.display());
    Ok(cleaned)
}

/// Fits GARCH(1,1), runs the stationarity check and writes the feature CSV.
pub fn cmd_features(cfg: &RunConfig) -> Result<FeatureMatrix, CliError> {
    let series = PriceSeries::read_csv(cfg.cleaned_path())?;
    let prices = series.prices();
    let garch = fit_garch11_with(
        prices,
        &GarchConfig {
            mean: cfg.garch_mean,
            ..Default::default()
        },
    )?;

    let adf_input: Vec<f64> = match cfg.adf_series {
        AdfSeries::Prices => prices.to_vec(),
        AdfSeries::Returns => returns_with(prices, cfg.indicators.return_convention)?
            .into_iter()
            .flatten()
            .collect(),
    };
    let adf = adf_test(&adf_input, AdfVariant::Trend, cfg.adf_lags)?;
    if !adf.reject_at_1pct {
        warn!(
            "ADF statistic {:.3} does not reject a unit root at 1% (critical {}); GARCH attributes may be unreliable",
            adf.statistic, adf.critical_values.pct1
        );
    }

    let fm = build_feature_matrix(&series, &garch, &cfg.indicators)?;
    let mut buf = Vec::new();
    fm.write_csv(&mut buf).expect("writing to memory cannot fail");
    write_file(&cfg.features_path(), &buf)?;
    let mut garch_json = garch.to_json().into_bytes();
    garch_json.push(b'\n');
    write_file(&cfg.features_meta_path("garch"), &garch_json)?;
    write_file(
        &cfg.features_meta_path("adf"),
        &pretty(&serde_json::to_value(&adf).expect("ADF result serialises")),
    )?;
    info!("wrote {} ({} rows)", cfg.features_path().display(), fm.rows());
    Ok(fm)
}

fn load_features(cfg: &RunConfig) -> Result<FeatureMatrix, CliError> {
    Ok(FeatureMatrix::read_csv_str(&read_text(&cfg.features_path())?)?)
}

/// Training and held-out windows for the global model.
fn split_windows(cfg: &RunConfig, fm: &FeatureMatrix) -> Result<(Vec<Window>, Vec<Window>), CliError> {
    let mut windows = make_windows(fm, cfg.walk.window_length)?.windows;
    let n_train = (windows.len() as f64 * cfg.train_fraction).floor() as usize;
    if n_train < 2 || n_train >= windows.len() {
        return Err(CliError::Config(format!(
            "{} windows cannot be split at train_fraction {}",
            windows.len(),
            cfg.train_fraction
        )));
    }
    let held_out = windows.split_off(n_train);
    Ok((windows, held_out))
}

/// Trains one model on the leading share of windows.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let fm = load_features(cfg)?;
    let (train, _) = split_windows(cfg, &fm)?;
    let (model, curve) = train_global(&train, cfg.walk.window_length, cfg.variant, &cfg.hyper, cfg.seed)?;

    let ck_path = cfg.checkpoint_path("global");
    write_file(&ck_path, &model.to_checkpoint().to_bytes())?;
    let mut buf = Vec::new();
    write_loss_curve(&mut buf, &curve).expect("writing to memory cannot fail");
    write_file(&cfg.report_path("train-loss.csv"), &buf)?;
    info!("wrote {}", ck_path.display());
    Ok(curve)
}

/// Runs the day-by-day walk-forward backtest from a fresh model.
pub fn cmd_walkforward(cfg: &RunConfig) -> Result<BacktestReport, CliError> {
    let fm = load_features(cfg)?;
    let outcome = walk_forward(&fm, &cfg.walk, cfg.variant, &cfg.hyper)?;

    let mut csv = Vec::new();
    outcome.report.write_csv(&mut csv).expect("writing to memory cannot fail");
    write_file(&cfg.report_path("walkforward.csv"), &csv)?;
    let mut summary = outcome.report.summary_json().into_bytes();
    summary.push(b'\n');
    write_file(&cfg.report_path("walkforward.json"), &summary)?;
    let mut loss = Vec::new();
    write_loss_curve(&mut loss, &outcome.warmup_loss).expect("writing to memory cannot fail");
    write_file(&cfg.report_path("warmup-loss.csv"), &loss)?;
    write_file(&cfg.checkpoint_path("walkforward"), &outcome.model.to_checkpoint().to_bytes())?;
    Ok(outcome.report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn summary_line(name: &str, s: &Summary) -> String {
    format!(
        "{name:<12} days {:>5}  acc {:>7}  auc {:>7}  total {:>9.4}  annual {:>9}",
        s.days,
        fmt_opt(s.accuracy),
        fmt_opt(s.auc),
        s.total_return,
        fmt_opt(s.annualized_return)
    )
}

/// Scores the held-out windows with the global checkpoint and combines the
/// result with the walk-forward summary, if one exists. Returns the text
/// table that the binary prints.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let ck_path = cfg.checkpoint_path("global");
    if !ck_path.exists() {
        return Err(CliError::MissingCheckpoint(ck_path));
    }
    let model = TrainedModel::from_checkpoint(Checkpoint::load(&ck_path)?)?;
    if model.params.config.steps != cfg.walk.window_length || model.params.variant() != cfg.variant {
        return Err(CliError::Config(format!(
            "checkpoint was trained as {} with window {}, not {} with window {}",
            model.params.variant(),
            model.params.config.steps,
            cfg.variant,
            cfg.walk.window_length
        )));
    }
    let fm = load_features(cfg)?;
    let (_, held_out) = split_windows(cfg, &fm)?;
    let scores = held_out
        .iter()
        .map(|w| model.predict(w))
        .collect::<Result<Vec<_>, _>>()?;
    let dates: Vec<_> = held_out.iter().map(|w| fm.dates()[w.end_row + 1]).collect();
    let realized: Vec<f64> = held_out.iter().map(|w| w.target).collect();
    let holdout = BacktestReport::new(
        held_out.first().map(|w| w.end_date),
        &dates,
        &scores,
        &realized,
        cfg.walk.initial_capital,
    );
    let mut csv = Vec::new();
    holdout.write_csv(&mut csv).expect("writing to memory cannot fail");
    write_file(&cfg.report_path("holdout.csv"), &csv)?;

    let wf_path = cfg.report_path("walkforward.json");
    let walkforward: Option<Summary> = if wf_path.exists() {
        Some(
            serde_json::from_str(&read_text(&wf_path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", wf_path.display())))?,
        )
    } else {
        None
    };
    let combined = json!({
        "asset": cfg.asset.to_string().to_lowercase(),
        "variant": cfg.variant.as_str(),
        "holdout": holdout.summary,
        "walkforward": walkforward,
    });
    write_file(&cfg.report_path("summary.json"), &pretty(&combined))?;

    let mut table = format!("{} {}\n", cfg.asset, cfg.variant);
    table.push_str(&summary_line("held-out", &holdout.summary));
    table.push('\n');
    match &walkforward {
        Some(s) => table.push_str(&summary_line("walk-forward", s)),
        None => table.push_str("walk-forward (not run)"),
    }
    table.push('\n');
    Ok(table)
}
