use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pricecast_cli::{cmd_clean, cmd_features, cmd_report, cmd_train, cmd_walkforward, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "pricecast", version, about = "Daily price direction forecasting and walk-forward backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(clap::Args)]
struct Opts {
    /// gold or bitcoin
    #[arg(long, global = true)]
    asset: Option<String>,
    /// lstm, bilstm or at-bilstm
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Sliding window length in trading days
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Feature rows observed before the first trade
    #[arg(long, global = true)]
    warmup: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Raw price file for the selected asset
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Any config key, e.g. --set epochs=20 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, align and gap-fill a raw price file
    Clean,
    /// Build indicator and GARCH features from the cleaned series
    Features,
    /// Train a model on the leading share of windows
    Train,
    /// Walk-forward backtest with incremental retraining
    Walkforward,
    /// Held-out evaluation of the trained model plus the walk-forward summary
    Report,
}

fn overrides(o: &Opts) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for s in &o.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {s}: expected KEY=VALUE")))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    put("asset", o.asset.clone());
    put("variant", o.variant.clone());
    put("window", o.window.map(|v| v.to_string()));
    put("warmup", o.warmup.map(|v| v.to_string()));
    put("seed", o.seed.map(|v| v.to_string()));
    put("out", o.out.as_ref().map(|p| p.display().to_string()));
    put("input", o.input.as_ref().map(|p| p.display().to_string()));
    Ok(map)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.opts.config.as_deref(), &overrides(&cli.opts)?)?;
    match cli.command {
        Command::Clean => {
            let s = cmd_clean(&cfg)?;
            println!("cleaned {} rows -> {}", s.len(), cfg.cleaned_path().display());
        }
        Command::Features => {
            let fm = cmd_features(&cfg)?;
            println!("{} feature rows -> {}", fm.rows(), cfg.features_path().display());
        }
        Command::Train => {
            let curve = cmd_train(&cfg)?;
            if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                println!("trained {} epochs, loss {first:.6e} -> {last:.6e}", curve.len());
            }
        }
        Command::Walkforward => {
            let r = cmd_walkforward(&cfg)?;
            println!(
                "{} trading days, final equity {:.2} -> {}",
                r.summary.days,
                r.summary.final_equity,
                cfg.report_path("walkforward.csv").display()
            );
        }
        Command::Report => print!("{}", cmd_report(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
