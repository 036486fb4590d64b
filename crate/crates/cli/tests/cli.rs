use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{Days, NaiveDate};
use pricecast_cli::{cmd_clean, cmd_features, cmd_report, cmd_train, cmd_walkforward, CliError, RunConfig};
use pricecast_core::timeseries::{FillFlag, PriceSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn prices(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = 1300.0;
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            p *= 1.0 + 0.01 * z;
            p
        })
        .collect()
}

/// Writes `date,price` rows in M/D/YY form; `None` prices become empty cells.
fn write_prices(path: &Path, values: &[Option<f64>]) {
    let d0 = NaiveDate::from_ymd_opt(2016, 9, 11).unwrap();
    let mut text = String::from("Date,Value\n");
    for (i, v) in values.iter().enumerate() {
        let d = d0 + Days::new(i as u64);
        let date = d.format("%-m/%-d/%y");
        match v {
            Some(p) => text.push_str(&format!("{date},{p}\n")),
            None => text.push_str(&format!("{date},\n")),
        }
    }
    fs::write(path, text).unwrap();
}

fn config(dir: &Path, input: &Path, extra: &[(&str, &str)]) -> RunConfig {
    let mut map: BTreeMap<String, String> = [
        ("asset", "gold"),
        ("variant", "at-bilstm"),
        ("seed", "3"),
        ("window", "5"),
        ("warmup", "60"),
        ("hidden", "4"),
        ("epochs", "3"),
        ("batch_size", "16"),
        ("retrain_epochs", "1"),
        ("retrain_span", "30"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    map.insert("input".into(), input.display().to_string());
    map.insert("out".into(), dir.join("out").display().to_string());
    for (k, v) in extra {
        map.insert(k.to_string(), v.to_string());
    }
    RunConfig::from_map(&map).unwrap()
}

fn setup(n: usize) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gold.csv");
    write_prices(&input, &prices(n, 1).into_iter().map(Some).collect::<Vec<_>>());
    (dir, input)
}

#[test]
fn clean_keeps_gap_free_input() {
    let (dir, input) = setup(40);
    let cfg = config(dir.path(), &input, &[]);
    let s = cmd_clean(&cfg).unwrap();
    assert_eq!(s.prices(), prices(40, 1).as_slice());
    assert_eq!(s.count(FillFlag::Observed), 40);
    assert_eq!(PriceSeries::read_csv(cfg.cleaned_path()).unwrap(), s);
}

#[test]
fn clean_interpolates_one_interior_gap() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gold.csv");
    let mut values: Vec<Option<f64>> = prices(30, 2).into_iter().map(Some).collect();
    values[12] = None;
    write_prices(&input, &values);
    let s = cmd_clean(&config(dir.path(), &input, &[])).unwrap();
    assert_eq!(s.count(FillFlag::Interpolated), 1);
    assert_eq!(s.flags()[12], FillFlag::Interpolated);
    assert!(s.prices()[12] > 0.0);
}

#[test]
fn clean_forward_fills_onto_partner_calendar() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.csv");
    let btc = dir.path().join("btc.csv");
    let p = prices(10, 3);
    let d0 = NaiveDate::from_ymd_opt(2016, 9, 11).unwrap();
    // gold skips day 3, bitcoin trades every day
    let mut text = String::from("date,price\n");
    for (i, v) in p.iter().enumerate().filter(|(i, _)| *i != 3) {
        text.push_str(&format!("{},{v}\n", d0 + Days::new(i as u64)));
    }
    fs::write(&gold, text).unwrap();
    write_prices(&btc, &p.iter().map(|v| Some(v * 10.0)).collect::<Vec<_>>());
    let cfg = config(dir.path(), &gold, &[("bitcoin", btc.to_str().unwrap())]);
    let s = cmd_clean(&cfg).unwrap();
    assert_eq!(s.len(), 10);
    assert_eq!(s.flags()[3], FillFlag::ForwardFilled);
    assert_eq!(s.prices()[3], p[2]);
}

#[test]
fn features_are_deterministic_with_documented_header() {
    let (dir, input) = setup(200);
    let cfg = config(dir.path(), &input, &[]);
    cmd_clean(&cfg).unwrap();
    cmd_features(&cfg).unwrap();
    let first = fs::read(cfg.features_path()).unwrap();
    cmd_features(&cfg).unwrap();
    assert_eq!(first, fs::read(cfg.features_path()).unwrap());
    let header = String::from_utf8(first).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "date,return,var10,var20,ma10,ma30,boll_high,boll_mid,boll_low,psy,rsi,garch_mu,garch_sigma2,target"
    );
    assert!(cfg.features_meta_path("garch").exists());
    assert!(cfg.features_meta_path("adf").exists());
}

#[test]
fn constant_prices_fail_features() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gold.csv");
    write_prices(&input, &vec![Some(100.0); 150]);
    let cfg = config(dir.path(), &input, &[]);
    cmd_clean(&cfg).unwrap();
    assert!(matches!(cmd_features(&cfg), Err(CliError::Garch(_))));
}

#[test]
fn report_needs_a_checkpoint() {
    let (dir, input) = setup(200);
    let cfg = config(dir.path(), &input, &[]);
    cmd_clean(&cfg).unwrap();
    cmd_features(&cfg).unwrap();
    assert!(matches!(cmd_report(&cfg), Err(CliError::MissingCheckpoint(_))));
}

#[test]
fn train_walkforward_report_round() {
    let (dir, input) = setup(200);
    let cfg = config(dir.path(), &input, &[]);
    cmd_clean(&cfg).unwrap();
    cmd_features(&cfg).unwrap();
    let curve = cmd_train(&cfg).unwrap();
    assert_eq!(curve.len(), 3);
    assert!(cfg.checkpoint_path("global").exists());
    let loss_csv = fs::read_to_string(cfg.report_path("train-loss.csv")).unwrap();
    assert!(loss_csv.starts_with("epoch,loss\n1,"));

    let report = cmd_walkforward(&cfg).unwrap();
    let rows = fs::read_to_string(cfg.features_path()).unwrap().lines().count() - 1;
    assert_eq!(report.records.len(), rows - 60);
    let table = cmd_report(&cfg).unwrap();
    assert!(table.contains("held-out"));
    assert!(table.contains("walk-forward"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.report_path("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["variant"], "at-bilstm");
    assert!(summary["walkforward"]["days"].as_u64().unwrap() > 0);
    for sub in ["cleaned", "features", "checkpoints", "reports"] {
        assert!(dir.path().join("out").join(sub).is_dir(), "{sub}");
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pricecast"))
}

#[test]
fn binary_reports_unreadable_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["clean", "--asset", "gold", "--seed", "1", "--input"])
        .arg(dir.path().join("nope.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.csv"), "{err}");
}

#[test]
fn binary_requires_seed() {
    let out = bin().args(["clean", "--asset", "gold"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn binary_report_without_checkpoint_fails() {
    let (dir, input) = setup(150);
    let out_dir = dir.path().join("out");
    let run = |cmd: &str| {
        bin()
            .args([cmd, "--seed", "2", "--window", "5", "--warmup", "60"])
            .arg("--input")
            .arg(&input)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap()
    };
    assert!(run("clean").status.success());
    assert!(run("features").status.success());
    let r = run("report");
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("checkpoint"));
}

#[test]
fn binary_config_file_and_flag_precedence() {
    let (dir, input) = setup(150);
    let cfg_path = dir.path().join("run.cfg");
    fs::write(
        &cfg_path,
        format!(
            "seed = 5\nwindow = 5\nwarmup = 60\nepochs = 2\nhidden = 3\nbatch_size = 16\ninput = {}\nout = {}\n",
            input.display(),
            dir.path().join("from-file").display()
        ),
    )
    .unwrap();
    let flag_out = dir.path().join("from-flag");
    let out = bin()
        .arg("clean")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&flag_out)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(flag_out.join("cleaned/gold.csv").exists());
    assert!(!dir.path().join("from-file").exists());
}
