use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::backtest::{backtest_equity, positions};
use super::metrics::{accuracy, auc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Flat,
    Long,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Flat => "flat",
            Position::Long => "long",
        })
    }
}

/// One traded day: the score made the evening before, the return realised
/// on `date`, the position held and the equity after the day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub score: f64,
    pub realized: f64,
    pub position: Position,
    pub equity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub days: usize,
    /// Days with a non-zero realised return.
    pub decided_days: usize,
    /// `None` when no day had a non-zero return.
    pub accuracy: Option<f64>,
    /// `None` when only one direction occurred.
    pub auc: Option<f64>,
    pub initial_capital: f64,
    pub final_equity: f64,
    pub total_return: f64,
    /// Compounded over calendar days / 365; `None` for an empty span.
    pub annualized_return: Option<f64>,
    pub start_date: Option<String>,
    pub end_date: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub records: Vec<DailyRecord>,
    pub summary: Summary,
}

impl BacktestReport {
    /// `start` is the date the first score was made (the day before the
    /// first record).
    pub fn new(
        start: Option<NaiveDate>,
        dates: &[NaiveDate],
        scores: &[f64],
        realized: &[f64],
        initial: f64,
    ) -> Self {
        let equity = backtest_equity(scores, realized, initial);
        let records: Vec<DailyRecord> = dates
            .iter()
            .zip(scores)
            .zip(realized)
            .zip(positions(scores))
            .zip(&equity[1..])
            .map(|((((d, s), r), p), e)| DailyRecord {
                date: *d,
                score: *s,
                realized: *r,
                position: if p > 0.0 { Position::Long } else { Position::Flat },
                equity: *e,
            })
            .collect();
        let final_equity = *equity.last().unwrap();
        let total_return = final_equity / initial - 1.0;
        let end = dates.last().copied();
        let annualized_return = match (start, end) {
            (Some(s), Some(e)) if e > s => {
                let years = (e - s).num_days() as f64 / 365.0;
                Some((final_equity / initial).powf(1.0 / years) - 1.0)
            }
            _ => None,
        };
        let summary = Summary {
            days: records.len(),
            decided_days: realized.iter().filter(|r| **r != 0.0).count(),
            accuracy: accuracy(scores, realized).ok(),
            auc: auc(scores, realized).ok(),
            initial_capital: initial,
            final_equity,
            total_return,
            annualized_return,
            start_date: start.filter(|_| !records.is_empty()).map(|d| d.to_string()),
            end_date: end.map(|d| d.to_string()),
        };
        Self { records, summary }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }

    pub fn realized(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.realized).collect()
    }

    /// Header `date,score,realized,position,equity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,score,realized,position,equity")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.date, r.score, r.realized, r.position, r.equity)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serialises")
    }
}

/// Two-column `epoch,loss` CSV, epochs counted from 1.
pub fn write_loss_curve<W: Write>(mut w: W, curve: &[f64]) -> std::io::Result<()> {
    writeln!(w, "epoch,loss")?;
    for (i, l) in curve.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, l)?;
    }
    Ok(())
}
