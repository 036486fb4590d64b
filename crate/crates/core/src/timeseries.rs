//! Raw price loading, calendar alignment and gap filling.
//!
//! Cleaning happens in two passes. [`align_calendar`] puts the quotes of one
//! asset on a master calendar, forward-filling days the market was closed.
//! Rows that exist in the source file but carry no price are kept as
//! [`FillFlag::Missing`] and later replaced by [`lagrange_fill`], which
//! evaluates the interpolating polynomial through the nearest observed days.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of observed neighbours used by [`lagrange_fill`] (local cubic).
pub const DEFAULT_LAGRANGE_WINDOW: usize = 4;

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("first calendar date {0} has no observed quote")]
    NoAnchor(NaiveDate),
    #[error("calendar is not strictly increasing at {0}")]
    UnsortedCalendar(NaiveDate),
    #[error("quote dated {0} is inside the calendar range but not on the calendar")]
    OffCalendar(NaiveDate),
    #[error("not enough observed neighbours to interpolate {0}")]
    InsufficientNeighbors(NaiveDate),
    #[error("interpolation window must be at least 2, got {0}")]
    InvalidWindow(usize),
}

pub type Result<T, E = TimeseriesError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Asset {
    Gold,
    Bitcoin,
}

impl Asset {
    pub fn as_str(self) -> &'static str {
        match self {
            Asset::Gold => "gold",
            Asset::Bitcoin => "bitcoin",
        }
    }
}

impl fmt::Display for Asset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Asset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gold" => Ok(Asset::Gold),
            "bitcoin" | "btc" => Ok(Asset::Bitcoin),
            other => Err(format!("unknown asset '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawQuote {
    pub date: NaiveDate,
    pub price: f64,
    pub asset: Asset,
}

/// A row that had a valid date but no price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingQuote {
    pub line: usize,
    pub date: NaiveDate,
}

/// Everything read from one price file.
#[derive(Debug, Clone, Default)]
pub struct QuoteFile {
    pub quotes: Vec<RawQuote>,
    pub missing: Vec<MissingQuote>,
}

impl QuoteFile {
    pub fn first_observed(&self) -> Option<NaiveDate> {
        self.quotes.first().map(|q| q.date)
    }

    pub fn missing_dates(&self) -> Vec<NaiveDate> {
        self.missing.iter().map(|m| m.date).collect()
    }
}

/// Parses ISO-8601 (`2016-09-11`) and US month/day/year (`9/11/16`, `9/11/2016`).
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() != 3 {
        return None;
    }
    let month: u32 = parts[0].trim().parse().ok()?;
    let day: u32 = parts[1].trim().parse().ok()?;
    let year_str = parts[2].trim();
    let mut year: i32 = year_str.parse().ok()?;
    if year_str.len() <= 2 {
        year += 2000;
    }
    NaiveDate::from_ymd_opt(year, month, day)
}

fn is_missing_marker(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "n/a" | "-"
    )
}

/// Non-blank records of a comma-separated text with their 1-based line
/// numbers. Fields are trimmed and rows may differ in length.
pub(crate) fn csv_records(text: &str) -> std::result::Result<Vec<(usize, csv::StringRecord)>, (usize, String)> {
    let line_of = |p: Option<&csv::Position>| p.map_or(0, |p| p.line() as usize);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| (line_of(e.position()), e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line_of(rec.position()), rec));
    }
    Ok(out)
}

/// Parses the contents of a two-column `date,price` file.
///
/// A header line is accepted only as the first non-empty line. Rows with a
/// date and an empty price marker are returned in [`QuoteFile::missing`].
pub fn parse_price_str(text: &str, asset: Asset) -> Result<QuoteFile> {
    let mut out = QuoteFile::default();
    let mut seen_data = false;
    let records = csv_records(text).map_err(|(line, reason)| TimeseriesError::MalformedRow { line, reason })?;
    for (line, rec) in records {
        let fields: Vec<&str> = rec.iter().map(|f| f.trim_start_matches('\u{feff}')).collect();
        if fields.len() != 2 {
            return Err(TimeseriesError::MalformedRow {
                line,
                reason: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let Some(date) = parse_date(fields[0]) else {
            if !seen_data && fields[1].parse::<f64>().is_err() {
                // header
                seen_data = true;
                continue;
            }
            return Err(TimeseriesError::MalformedRow {
                line,
                reason: format!("unrecognised date '{}'", fields[0]),
            });
        };
        seen_data = true;
        if is_missing_marker(fields[1]) {
            out.missing.push(MissingQuote { line, date });
            continue;
        }
        let price: f64 = fields[1]
            .parse()
            .map_err(|_| TimeseriesError::MalformedRow {
                line,
                reason: format!("unparseable price '{}'", fields[1]),
            })?;
        if !price.is_finite() || price <= 0.0 {
            return Err(TimeseriesError::MalformedRow {
                line,
                reason: format!("price must be positive, got {price}"),
            });
        }
        out.quotes.push(RawQuote { date, price, asset });
    }

    out.quotes.sort_by_key(|q| q.date);
    out.missing.sort_by_key(|m| m.date);
    let mut seen = HashSet::new();
    for date in out
        .quotes
        .iter()
        .map(|q| q.date)
        .chain(out.missing.iter().map(|m| m.date))
    {
        if !seen.insert(date) {
            return Err(TimeseriesError::DuplicateDate(date));
        }
    }
    Ok(out)
}

pub fn parse_price_csv(path: impl AsRef<Path>, asset: Asset) -> Result<QuoteFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            TimeseriesError::FileNotFound(path.display().to_string())
        } else {
            TimeseriesError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    parse_price_str(&text, asset)
}

/// Union of every date mentioned by the given files, starting from the
/// latest first-observed date so that every asset has an anchor.
pub fn master_calendar(files: &[&QuoteFile]) -> Vec<NaiveDate> {
    let start = files.iter().filter_map(|f| f.first_observed()).max();
    let Some(start) = start else {
        return Vec::new();
    };
    let mut dates: Vec<NaiveDate> = files
        .iter()
        .flat_map(|f| {
            f.quotes
                .iter()
                .map(|q| q.date)
                .chain(f.missing.iter().map(|m| m.date))
        })
        .filter(|d| *d >= start)
        .collect();
    dates.sort();
    dates.dedup();
    dates
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillFlag {
    Observed,
    ForwardFilled,
    Interpolated,
    /// Awaiting interpolation; the price slot holds NaN.
    Missing,
}

impl FillFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            FillFlag::Observed => "observed",
            FillFlag::ForwardFilled => "forward_filled",
            FillFlag::Interpolated => "interpolated",
            FillFlag::Missing => "missing",
        }
    }
}

impl FromStr for FillFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "observed" => Ok(FillFlag::Observed),
            "forward_filled" => Ok(FillFlag::ForwardFilled),
            "interpolated" => Ok(FillFlag::Interpolated),
            "missing" => Ok(FillFlag::Missing),
            other => Err(format!("unknown fill flag '{other}'")),
        }
    }
}

/// Date-indexed prices of one asset. Dates are held as integer day offsets
/// from `origin` so window arithmetic is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    origin: NaiveDate,
    offsets: Vec<i64>,
    prices: Vec<f64>,
    flags: Vec<FillFlag>,
}

impl PriceSeries {
    /// Builds a series from parallel vectors; dates must be strictly increasing.
    pub fn new(dates: &[NaiveDate], prices: Vec<f64>, flags: Vec<FillFlag>) -> Result<Self> {
        assert_eq!(dates.len(), prices.len(), "dates/prices length mismatch");
        assert_eq!(dates.len(), flags.len(), "dates/flags length mismatch");
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(TimeseriesError::UnsortedCalendar(w[1]));
            }
        }
        let origin = dates
            .first()
            .copied()
            .unwrap_or_else(|| NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
        let offsets = dates.iter().map(|d| (*d - origin).num_days()).collect();
        Ok(Self {
            origin,
            offsets,
            prices,
            flags,
        })
    }

    /// Convenience for synthetic data: consecutive days starting at `origin`,
    /// all observed.
    pub fn from_prices(origin: NaiveDate, prices: Vec<f64>) -> Self {
        let n = prices.len();
        Self {
            origin,
            offsets: (0..n as i64).collect(),
            prices,
            flags: vec![FillFlag::Observed; n],
        }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn flags(&self) -> &[FillFlag] {
        &self.flags
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.origin + chrono::Duration::days(self.offsets[i])
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.len()).map(|i| self.date(i)).collect()
    }

    /// True once no entry is awaiting interpolation.
    pub fn is_clean(&self) -> bool {
        !self.flags.contains(&FillFlag::Missing)
    }

    pub fn count(&self, flag: FillFlag) -> usize {
        self.flags.iter().filter(|f| **f == flag).count()
    }

    /// Writes `date,price,fill_flag` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,price,fill_flag")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{}",
                self.date(i).format("%Y-%m-%d"),
                self.prices[i],
                self.flags[i].as_str()
            )?;
        }
        Ok(())
    }

    /// Reads the format produced by [`PriceSeries::write_csv`].
    pub fn read_csv_str(text: &str) -> Result<Self> {
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        let mut flags = Vec::new();
        let records = csv_records(text).map_err(|(line, reason)| TimeseriesError::MalformedRow { line, reason })?;
        for (i, (line, rec)) in records.iter().enumerate() {
            if i == 0 && rec.get(0) == Some("date") {
                continue;
            }
            let line = *line;
            let malformed = |reason: String| TimeseriesError::MalformedRow { line, reason };
            let fields: Vec<&str> = rec.iter().collect();
            if fields.len() != 3 {
                return Err(malformed(format!("expected 3 columns, found {}", fields.len())));
            }
            let date = parse_date(fields[0])
                .ok_or_else(|| malformed(format!("unrecognised date '{}'", fields[0])))?;
            let price: f64 = fields[1]
                .trim()
                .parse()
                .map_err(|_| malformed(format!("unparseable price '{}'", fields[1])))?;
            let flag: FillFlag = fields[2].parse().map_err(malformed)?;
            dates.push(date);
            prices.push(price);
            flags.push(flag);
        }
        Self::new(&dates, prices, flags)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                TimeseriesError::FileNotFound(path.display().to_string())
            } else {
                TimeseriesError::Io {
                    path: path.display().to_string(),
                    source: e,
                }
            }
        })?;
        Self::read_csv_str(&text)
    }
}

/// Places quotes on `calendar`, forward-filling dates without a quote.
pub fn align_calendar(quotes: &[RawQuote], calendar: &[NaiveDate]) -> Result<PriceSeries> {
    align_calendar_with_gaps(quotes, &[], calendar)
}

/// Like [`align_calendar`], but dates listed in `gaps` are flagged
/// [`FillFlag::Missing`] for later interpolation instead of forward-filled.
pub fn align_calendar_with_gaps(
    quotes: &[RawQuote],
    gaps: &[NaiveDate],
    calendar: &[NaiveDate],
) -> Result<PriceSeries> {
    for w in calendar.windows(2) {
        if w[1] <= w[0] {
            return Err(TimeseriesError::UnsortedCalendar(w[1]));
        }
    }
    let (Some(&first), Some(&last)) = (calendar.first(), calendar.last()) else {
        return PriceSeries::new(&[], Vec::new(), Vec::new());
    };

    let on_calendar: HashSet<NaiveDate> = calendar.iter().copied().collect();
    let mut observed: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for q in quotes {
        if q.date < first || q.date > last {
            continue;
        }
        if !on_calendar.contains(&q.date) {
            return Err(TimeseriesError::OffCalendar(q.date));
        }
        if observed.insert(q.date, q.price).is_some() {
            return Err(TimeseriesError::DuplicateDate(q.date));
        }
    }
    let gaps: HashSet<NaiveDate> = gaps.iter().copied().collect();

    if !observed.contains_key(&first) {
        return Err(TimeseriesError::NoAnchor(first));
    }

    let mut prices = Vec::with_capacity(calendar.len());
    let mut flags = Vec::with_capacity(calendar.len());
    let mut last_observed = f64::NAN;
    for d in calendar {
        if let Some(&p) = observed.get(d) {
            last_observed = p;
            prices.push(p);
            flags.push(FillFlag::Observed);
        } else if gaps.contains(d) {
            prices.push(f64::NAN);
            flags.push(FillFlag::Missing);
        } else {
            prices.push(last_observed);
            flags.push(FillFlag::ForwardFilled);
        }
    }
    PriceSeries::new(calendar, prices, flags)
}

/// Evaluates the Lagrange interpolating polynomial through `(xs, ys)` at `x`.
///
/// `xs` must be pairwise distinct.
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut total = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut weight = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                weight *= (x - xk) / (xj - xk);
            }
        }
        total += weight * yj;
    }
    total
}

/// Replaces every [`FillFlag::Missing`] entry by the Lagrange interpolant
/// through the `window` nearest observed days.
///
/// If the polynomial comes out non-positive (possible with high local
/// curvature) the value falls back to linear interpolation between the
/// closest observed day on each side.
pub fn lagrange_fill(series: &PriceSeries, window: usize) -> Result<PriceSeries> {
    if window < 2 {
        return Err(TimeseriesError::InvalidWindow(window));
    }
    let observed: Vec<usize> = series
        .flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f == FillFlag::Observed)
        .map(|(i, _)| i)
        .collect();

    let mut out = series.clone();
    for i in 0..series.len() {
        if series.flags[i] != FillFlag::Missing {
            continue;
        }
        if observed.len() < window {
            return Err(TimeseriesError::InsufficientNeighbors(series.date(i)));
        }
        let x = series.offsets[i];
        // observed indices are sorted by offset; expand outwards from the gap
        let split = observed.partition_point(|&j| series.offsets[j] < x);
        let (mut left, mut right) = (split, split);
        let mut chosen = Vec::with_capacity(window);
        while chosen.len() < window {
            let dl = (left > 0).then(|| x - series.offsets[observed[left - 1]]);
            let dr = (right < observed.len()).then(|| series.offsets[observed[right]] - x);
            match (dl, dr) {
                (Some(a), Some(b)) if a <= b => {
                    left -= 1;
                    chosen.push(observed[left]);
                }
                (Some(_), None) => {
                    left -= 1;
                    chosen.push(observed[left]);
                }
                (_, Some(_)) => {
                    chosen.push(observed[right]);
                    right += 1;
                }
                (None, None) => break,
            }
        }
        let xs: Vec<f64> = chosen
            .iter()
            .map(|&j| (series.offsets[j] - x) as f64)
            .collect();
        let ys: Vec<f64> = chosen.iter().map(|&j| series.prices[j]).collect();
        let mut value = lagrange_eval(&xs, &ys, 0.0);

        if !(value.is_finite() && value > 0.0) {
            value = match (split.checked_sub(1), observed.get(split)) {
                (Some(l), Some(&r)) => {
                    let l = observed[l];
                    let (xl, xr) = (series.offsets[l] as f64, series.offsets[r] as f64);
                    let t = (x as f64 - xl) / (xr - xl);
                    series.prices[l] + t * (series.prices[r] - series.prices[l])
                }
                _ => ys[0],
            };
        }
        out.prices[i] = value;
        out.flags[i] = FillFlag::Interpolated;
    }
    Ok(out)
}
