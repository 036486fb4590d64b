//! Technical attributes of a cleaned price series and the feature matrix
//! the forecasters consume.
//!
//! Every rolling statistic is computed from its own trailing window only, so
//! appending a price never changes an earlier value. Entries whose window is
//! not yet full are `None`.

use std::fmt::Write as _;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garch::{garch_attributes, GarchFit};
use crate::timeseries::{csv_records, parse_date, PriceSeries};

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("price at index {0} is zero or negative")]
    ZeroPrice(usize),
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("window must be positive")]
    ZeroWindow,
    #[error("need at least {needed} prices, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("GARCH series covers {garch} dates but the price series has {prices}")]
    AlignmentMismatch { garch: usize, prices: usize },
    #[error("invalid indicator config: {0}")]
    InvalidConfig(String),
    #[error("malformed feature file at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
}

pub type Result<T, E = IndicatorError> = std::result::Result<T, E>;

/// Denominator used for the daily return.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnConvention {
    /// (P_t - P_{t-1}) / P_t
    #[default]
    CurrentPrice,
    /// (P_t - P_{t-1}) / P_{t-1}
    PreviousPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub var_windows: (usize, usize),
    pub ma_windows: (usize, usize),
    pub boll_window: usize,
    pub psy_window: usize,
    pub rsi_window: usize,
    pub return_convention: ReturnConvention,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            var_windows: (10, 20),
            ma_windows: (10, 30),
            boll_window: 20,
            psy_window: 12,
            rsi_window: 14,
            return_convention: ReturnConvention::CurrentPrice,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.var_windows.0,
            self.var_windows.1,
            self.ma_windows.0,
            self.ma_windows.1,
            self.boll_window,
            self.psy_window,
            self.rsi_window,
        ];
        if let Some(w) = all.iter().find(|w| **w < 2) {
            return Err(IndicatorError::InvalidConfig(format!(
                "every window must be >= 2, got {w}"
            )));
        }
        Ok(())
    }

    /// Column names, in matrix order.
    pub fn feature_names(&self) -> Vec<String> {
        vec![
            "return".into(),
            format!("var{}", self.var_windows.0),
            format!("var{}", self.var_windows.1),
            format!("ma{}", self.ma_windows.0),
            format!("ma{}", self.ma_windows.1),
            "boll_high".into(),
            "boll_mid".into(),
            "boll_low".into(),
            "psy".into(),
            "rsi".into(),
            "garch_mu".into(),
            "garch_sigma2".into(),
        ]
    }

    /// Index of the first date on which every indicator is defined.
    pub fn warmup(&self) -> usize {
        [
            1,
            self.var_windows.0 - 1,
            self.var_windows.1 - 1,
            self.ma_windows.0 - 1,
            self.ma_windows.1 - 1,
            self.boll_window - 1,
            self.psy_window,
            self.rsi_window,
        ]
        .into_iter()
        .max()
        .unwrap()
    }
}

pub fn returns(prices: &[f64]) -> Result<Vec<Option<f64>>> {
    returns_with(prices, ReturnConvention::CurrentPrice)
}

pub fn returns_with(prices: &[f64], convention: ReturnConvention) -> Result<Vec<Option<f64>>> {
    if prices.len() < 2 {
        return Err(IndicatorError::TooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    if let Some(i) = prices.iter().position(|p| p.is_nan() || *p <= 0.0) {
        return Err(IndicatorError::ZeroPrice(i));
    }
    let mut out = Vec::with_capacity(prices.len());
    out.push(None);
    out.extend(prices.windows(2).map(|w| {
        let denom = match convention {
            ReturnConvention::CurrentPrice => w[1],
            ReturnConvention::PreviousPrice => w[0],
        };
        Some((w[1] - w[0]) / denom)
    }));
    Ok(out)
}

fn check_window(window: usize, len: usize) -> Result<()> {
    if window == 0 {
        return Err(IndicatorError::ZeroWindow);
    }
    if window > len {
        return Err(IndicatorError::WindowTooLarge { window, len });
    }
    Ok(())
}

/// Applies `stat` to every full trailing window.
fn rolling<F>(values: &[f64], window: usize, stat: F) -> Result<Vec<Option<f64>>>
where
    F: Fn(&[f64]) -> f64,
{
    check_window(window, values.len())?;
    Ok((0..values.len())
        .map(|i| (i + 1 >= window).then(|| stat(&values[i + 1 - window..=i])))
        .collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pop_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Trailing population variance.
pub fn rolling_variance(prices: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    rolling(prices, window, pop_variance)
}

/// Trailing arithmetic mean.
pub fn moving_average(prices: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    rolling(prices, window, mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bollinger {
    pub high: Vec<Option<f64>>,
    pub mid: Vec<Option<f64>>,
    pub low: Vec<Option<f64>>,
}

/// Trailing mean ± two trailing population standard deviations.
pub fn bollinger(prices: &[f64], window: usize) -> Result<Bollinger> {
    let mid = moving_average(prices, window)?;
    let sd = rolling(prices, window, |w| pop_variance(w).sqrt())?;
    let band = |sign: f64| -> Vec<Option<f64>> {
        mid.iter()
            .zip(&sd)
            .map(|(m, s)| Some(m.as_ref()? + sign * 2.0 * s.as_ref()?))
            .collect()
    };
    Ok(Bollinger {
        high: band(1.0),
        low: band(-1.0),
        mid,
    })
}

/// Fraction of strictly positive returns among the trailing `window`.
pub fn psych_index(returns: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    rolling(returns, window, |w| {
        w.iter().filter(|r| **r > 0.0).count() as f64 / w.len() as f64
    })
}

/// Relative strength index over the trailing `window` price changes.
///
/// A window with no losses scores 100 and one with no gains scores 0; a
/// completely flat window scores 50.
pub fn rsi(prices: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    check_window(window, prices.len())?;
    if window >= prices.len() {
        return Err(IndicatorError::WindowTooLarge {
            window: window + 1,
            len: prices.len(),
        });
    }
    let changes: Vec<f64> = prices.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![None];
    out.extend(rolling(&changes, window, |w| {
        let gains: f64 = w.iter().filter(|d| **d > 0.0).sum();
        let losses: f64 = w.iter().filter(|d| **d < 0.0).map(|d| -d).sum();
        rsi_from_sums(gains, losses, window)
    })?);
    Ok(out)
}

fn rsi_from_sums(gains: f64, losses: f64, n: usize) -> f64 {
    let (avg_gain, avg_loss) = (gains / n as f64, losses / n as f64);
    match (avg_gain > 0.0, avg_loss > 0.0) {
        (false, false) => 50.0,
        (true, false) => 100.0,
        (false, true) => 0.0,
        (true, true) => 100.0 - 100.0 / (1.0 + avg_gain / avg_loss),
    }
}

/// Per-date attribute rows plus the next-day return target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    dates: Vec<NaiveDate>,
    /// Row-major, `dates.len() × names.len()`.
    values: Vec<f64>,
    target: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        names: Vec<String>,
        dates: Vec<NaiveDate>,
        rows: Vec<Vec<f64>>,
        target: Vec<f64>,
    ) -> Result<Self> {
        let d = names.len();
        if rows.len() != dates.len() || target.len() != dates.len() {
            return Err(IndicatorError::InvalidConfig(format!(
                "row count mismatch: {} dates, {} rows, {} targets",
                dates.len(),
                rows.len(),
                target.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(IndicatorError::InvalidConfig(format!(
                "row of width {} in a {d}-column matrix",
                r.len()
            )));
        }
        Ok(Self {
            names,
            dates,
            values: rows.into_iter().flatten().collect(),
            target,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut [f64] {
        &mut self.target
    }

    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.width();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.width();
        &mut self.values[i * d..(i + 1) * d]
    }

    /// Contiguous row-major block of rows `start..end`.
    pub fn block(&self, start: usize, end: usize) -> &[f64] {
        let d = self.width();
        &self.values[start * d..end * d]
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((0..self.rows()).map(|i| self.row(i)[j]).collect())
    }

    /// Header `date,<features...>,target`, one row per date.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,{},target", self.names.join(","))?;
        let mut line = String::new();
        for i in 0..self.rows() {
            line.clear();
            let _ = write!(line, "{}", self.dates[i].format("%Y-%m-%d"));
            for v in self.row(i) {
                let _ = write!(line, ",{v}");
            }
            let _ = write!(line, ",{}", self.target[i]);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv_str(text: &str) -> Result<Self> {
        let records = csv_records(text).map_err(|(line, reason)| IndicatorError::MalformedRow { line, reason })?;
        let mut lines = records.iter();
        let Some((_, header)) = lines.next() else {
            return Self::new(Vec::new(), Vec::new(), Vec::new(), Vec::new());
        };
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 2 || cols[0] != "date" || cols[cols.len() - 1] != "target" {
            return Err(IndicatorError::MalformedRow {
                line: 1,
                reason: "header must be date,<features...>,target".into(),
            });
        }
        let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let (mut dates, mut rows, mut target) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in lines {
            let line = *line;
            let fields: Vec<&str> = rec.iter().collect();
            if fields.len() != cols.len() {
                return Err(IndicatorError::MalformedRow {
                    line,
                    reason: format!("expected {} fields, found {}", cols.len(), fields.len()),
                });
            }
            let date = parse_date(fields[0]).ok_or_else(|| IndicatorError::MalformedRow {
                line,
                reason: format!("bad date '{}'", fields[0]),
            })?;
            let nums: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| IndicatorError::MalformedRow {
                    line,
                    reason: e.to_string(),
                })?;
            dates.push(date);
            target.push(nums[nums.len() - 1]);
            rows.push(nums[..nums.len() - 1].to_vec());
        }
        Self::new(names, dates, rows, target)
    }
}

/// Assembles the twelve attribute columns and the next-day return target.
///
/// Column order: return, short variance, long variance, short MA, long MA,
/// boll_high, boll_mid, boll_low, psy, rsi, garch_mu, garch_sigma2. Dates
/// with any undefined attribute or without a next day are dropped.
pub fn build_feature_matrix(
    series: &PriceSeries,
    garch: &GarchFit,
    cfg: &IndicatorConfig,
) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let (mu, sigma2) = garch_attributes(garch);
    if garch.n_input != series.len() || mu.len() != series.len() {
        return Err(IndicatorError::AlignmentMismatch {
            garch: mu.len(),
            prices: series.len(),
        });
    }
    let names = cfg.feature_names();
    let n = series.len();
    if n < cfg.warmup() + 2 {
        return FeatureMatrix::new(names, Vec::new(), Vec::new(), Vec::new());
    }

    let prices = series.prices();
    let ret = returns_with(prices, cfg.return_convention)?;
    let ret_dense: Vec<f64> = ret[1..].iter().map(|r| r.unwrap()).collect();
    let mut psy = vec![None];
    psy.extend(psych_index(&ret_dense, cfg.psy_window)?);
    let boll = bollinger(prices, cfg.boll_window)?;
    let columns = [
        ret.clone(),
        rolling_variance(prices, cfg.var_windows.0)?,
        rolling_variance(prices, cfg.var_windows.1)?,
        moving_average(prices, cfg.ma_windows.0)?,
        moving_average(prices, cfg.ma_windows.1)?,
        boll.high,
        boll.mid,
        boll.low,
        psy,
        rsi(prices, cfg.rsi_window)?,
        mu,
        sigma2,
    ];

    let dates = series.dates();
    let (mut out_dates, mut rows, mut target) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n - 1 {
        let row: Option<Vec<f64>> = columns.iter().map(|c| c[i]).collect();
        if let (Some(row), Some(next)) = (row, ret[i + 1]) {
            out_dates.push(dates[i]);
            rows.push(row);
            target.push(next);
        }
    }
    FeatureMatrix::new(names, out_dates, rows, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garch::{GarchParams, MeanModel};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn return_uses_current_price_denominator() {
        let r = returns(&[100.0, 110.0]).unwrap();
        assert_eq!(r[0], None);
        assert_eq!(r[1], Some(10.0 / 110.0));
        let r = returns_with(&[100.0, 110.0], ReturnConvention::PreviousPrice).unwrap();
        assert_eq!(r[1], Some(0.1));
    }

    #[test]
    fn returns_of_constant_series() {
        let r = returns(&[7.0; 5]).unwrap();
        assert!(r[1..].iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn zero_price_rejected() {
        assert_eq!(returns(&[100.0, 0.0]), Err(IndicatorError::ZeroPrice(1)));
    }

    #[test]
    fn variance_examples() {
        assert!(rolling_variance(&[3.0; 6], 4).unwrap()[3..]
            .iter()
            .all(|v| *v == Some(0.0)));
        let v = rolling_variance(&[1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(v[..2], [None, None]);
        assert!(close(v[2].unwrap(), 2.0 / 3.0, 1e-15));
        assert_eq!(
            rolling_variance(&[1.0, 2.0], 3),
            Err(IndicatorError::WindowTooLarge { window: 3, len: 2 })
        );
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(),
            vec![None, Some(1.5), Some(2.5), Some(3.5)]
        );
        let p = [1.5, -2.0, 9.0];
        assert_eq!(
            moving_average(&p, 1).unwrap(),
            p.iter().copied().map(Some).collect::<Vec<_>>()
        );
        assert!(moving_average(&[4.0; 5], 3).unwrap()[2..]
            .iter()
            .all(|v| *v == Some(4.0)));
    }

    #[test]
    fn bollinger_example() {
        let b = bollinger(&[1.0, 2.0, 3.0], 3).unwrap();
        let sd = (2.0f64 / 3.0).sqrt();
        assert_eq!(b.mid[2], Some(2.0));
        assert!(close(b.high[2].unwrap(), 2.0 + 2.0 * sd, 1e-15));
        assert!(close(b.low[2].unwrap(), 2.0 - 2.0 * sd, 1e-15));
        assert!((b.high[2].unwrap() - 3.633).abs() < 1e-3);
        assert!((b.low[2].unwrap() - 0.367).abs() < 1e-3);
        let flat = bollinger(&[5.0; 4], 2).unwrap();
        assert_eq!(flat.high[3], Some(5.0));
        assert_eq!(flat.low[3], Some(5.0));
    }

    #[test]
    fn psy_examples() {
        let up = psych_index(&[0.1; 20], 12).unwrap();
        assert!(up[11..].iter().all(|v| *v == Some(1.0)));
        let mixed = [1.0, -1.0, 2.0, -0.5, 0.3, -0.2, 0.1, -0.1, 4.0, -4.0, 1.0, -1.0];
        assert_eq!(psych_index(&mixed, 12).unwrap()[11], Some(0.5));
        assert_eq!(psych_index(&[0.0; 12], 12).unwrap()[11], Some(0.0));
    }

    #[test]
    fn rsi_examples() {
        let rising: Vec<f64> = (0..20).map(|i| 10.0 + i as f64).collect();
        assert!(rsi(&rising, 14).unwrap()[14..].iter().all(|v| *v == Some(100.0)));
        let falling: Vec<f64> = rising.iter().rev().copied().collect();
        assert!(rsi(&falling, 14).unwrap()[14..].iter().all(|v| *v == Some(0.0)));
        // changes +2, -1, +1: gains 3, losses 1
        let r = rsi(&[10.0, 12.0, 11.0, 12.0], 3).unwrap();
        assert_eq!(r[3], Some(75.0));
        assert_eq!(r[..3], [None, None, None]);
        assert_eq!(rsi(&[3.0; 6], 3).unwrap()[5], Some(50.0));
    }

    fn toy_fit(n: usize) -> GarchFit {
        GarchFit {
            params: GarchParams::new(1.0, 0.1, 0.1, 0.8),
            mean: MeanModel::LaggedPrice,
            loglik: 0.0,
            lead: 1,
            n_input: n,
            mu: vec![0.01; n - 1],
            sigma2: vec![0.5; n - 1],
        }
    }

    fn wavy_series(n: usize) -> PriceSeries {
        let prices = (0..n)
            .map(|i| 100.0 + 10.0 * (i as f64 * 0.3).sin() + 0.1 * i as f64)
            .collect();
        PriceSeries::from_prices(NaiveDate::from_ymd_opt(2016, 9, 11).unwrap(), prices)
    }

    #[test]
    fn matrix_drops_warmup_and_last_row() {
        let n = 400;
        let cfg = IndicatorConfig::default();
        assert_eq!(cfg.warmup(), 29);
        let fm = build_feature_matrix(&wavy_series(n), &toy_fit(n), &cfg).unwrap();
        assert_eq!(fm.rows(), n - cfg.warmup() - 1);
        assert_eq!(fm.width(), 12);
        assert_eq!(
            fm.names().join(","),
            "return,var10,var20,ma10,ma30,boll_high,boll_mid,boll_low,psy,rsi,garch_mu,garch_sigma2"
        );
        // target is the next row's return
        let ret = fm.column("return").unwrap();
        for i in 0..fm.rows() - 1 {
            assert_eq!(fm.target()[i], ret[i + 1]);
        }
    }

    #[test]
    fn short_series_gives_empty_matrix() {
        let fm = build_feature_matrix(&wavy_series(20), &toy_fit(20), &IndicatorConfig::default())
            .unwrap();
        assert!(fm.is_empty());
    }

    #[test]
    fn misaligned_garch() {
        let err = build_feature_matrix(&wavy_series(100), &toy_fit(90), &IndicatorConfig::default())
            .unwrap_err();
        assert!(matches!(err, IndicatorError::AlignmentMismatch { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let fm = build_feature_matrix(&wavy_series(80), &toy_fit(80), &IndicatorConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        fm.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, fm);
    }

    fn price_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.5f64..2.0, 40..80).prop_map(|steps| {
            steps
                .iter()
                .scan(100.0, |p, s| {
                    *p *= 0.9 + 0.1 * s;
                    Some(*p)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn appending_a_price_keeps_history(prices in price_strategy(), extra in 50.0f64..150.0) {
            let mut longer = prices.clone();
            longer.push(extra);
            let a = (
                rolling_variance(&prices, 10).unwrap(),
                moving_average(&prices, 30).unwrap(),
                bollinger(&prices, 20).unwrap().high,
                rsi(&prices, 14).unwrap(),
                returns(&prices).unwrap(),
            );
            let b = (
                rolling_variance(&longer, 10).unwrap(),
                moving_average(&longer, 30).unwrap(),
                bollinger(&longer, 20).unwrap().high,
                rsi(&longer, 14).unwrap(),
                returns(&longer).unwrap(),
            );
            let n = prices.len();
            prop_assert_eq!(&a.0[..], &b.0[..n]);
            prop_assert_eq!(&a.1[..], &b.1[..n]);
            prop_assert_eq!(&a.2[..], &b.2[..n]);
            prop_assert_eq!(&a.3[..], &b.3[..n]);
            prop_assert_eq!(&a.4[..], &b.4[..n]);
        }

        #[test]
        fn scaling_prices(prices in price_strategy(), k in 0.01f64..100.0) {
            let scaled: Vec<f64> = prices.iter().map(|p| p * k).collect();
            let same = |a: &[Option<f64>], b: &[Option<f64>], f: f64| {
                a.iter().zip(b).all(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => (x * f - y).abs() <= 1e-9 * (1.0 + y.abs()),
                    (None, None) => true,
                    _ => false,
                })
            };
            let r0 = returns(&prices).unwrap();
            let r1 = returns(&scaled).unwrap();
            prop_assert!(same(&r0, &r1, 1.0));
            let dense = |r: &[Option<f64>]| r[1..].iter().map(|v| v.unwrap()).collect::<Vec<_>>();
            prop_assert!(same(&psych_index(&dense(&r0), 12).unwrap(), &psych_index(&dense(&r1), 12).unwrap(), 1.0));
            prop_assert!(same(&rsi(&prices, 14).unwrap(), &rsi(&scaled, 14).unwrap(), 1.0));
            prop_assert!(same(&moving_average(&prices, 10).unwrap(), &moving_average(&scaled, 10).unwrap(), k));
            let (b0, b1) = (bollinger(&prices, 20).unwrap(), bollinger(&scaled, 20).unwrap());
            prop_assert!(same(&b0.high, &b1.high, k) && same(&b0.low, &b1.low, k));
            prop_assert!(same(&rolling_variance(&prices, 20).unwrap(), &rolling_variance(&scaled, 20).unwrap(), k * k));
        }

        #[test]
        fn bounds_hold(prices in price_strategy()) {
            let ret: Vec<f64> = returns(&prices).unwrap()[1..].iter().map(|r| r.unwrap()).collect();
            for v in psych_index(&ret, 12).unwrap().into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            for v in rsi(&prices, 14).unwrap().into_iter().flatten() {
                prop_assert!((0.0..=100.0).contains(&v));
            }
            let b = bollinger(&prices, 20).unwrap();
            for i in 19..prices.len() {
                let (h, m, l) = (b.high[i].unwrap(), b.mid[i].unwrap(), b.low[i].unwrap());
                prop_assert!(l <= m && m <= h);
                let sd = rolling_variance(&prices, 20).unwrap()[i].unwrap().sqrt();
                prop_assert!(((h - l) - 4.0 * sd).abs() <= 1e-9 * (1.0 + h.abs()));
            }
            prop_assert_eq!(b.mid, moving_average(&prices, 20).unwrap());
        }
    }
}
