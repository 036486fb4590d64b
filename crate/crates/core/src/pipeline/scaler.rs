use log::warn;

use super::window::Window;

/// Per-feature z-score transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with zero variance in the fitting data; their std is set to 1.
    pub degenerate: Vec<usize>,
}

impl Scaler {
    /// Fits on every row of every window, overlapping rows counted once per
    /// window they appear in.
    pub fn fit(windows: &[Window], width: usize) -> Self {
        let mut sum = vec![0.0; width];
        let mut n = 0usize;
        for w in windows {
            for row in w.data.chunks_exact(width) {
                sum.iter_mut().zip(row).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        let count = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let mut sq = vec![0.0; width];
        for w in windows {
            for row in w.data.chunks_exact(width) {
                for ((s, x), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *s += (x - m) * (x - m);
                }
            }
        }
        let mut degenerate = Vec::new();
        let std = sq
            .iter()
            .zip(&mean)
            .enumerate()
            .map(|(j, (s, m))| {
                let sd = (s / count).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    degenerate.push(j);
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        if !degenerate.is_empty() {
            warn!("zero-variance feature columns {degenerate:?}; scaled with std = 1");
        }
        Self {
            mean,
            std,
            degenerate,
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Scales a row-major block whose width matches the scaler.
    pub fn transform(&self, data: &[f64]) -> Vec<f64> {
        let d = self.width();
        data.chunks_exact(d)
            .flat_map(|row| {
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((x, m), s)| (x - m) / s)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn win(data: Vec<f64>) -> Window {
        Window {
            end_row: 0,
            end_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            data,
            target: 0.0,
        }
    }

    #[test]
    fn standardizes_training_data() {
        let ws: Vec<Window> = (0..20)
            .map(|i| win((0..6).map(|k| ((i * 6 + k) as f64 * 0.7).sin() * 5.0 + 3.0).collect()))
            .collect();
        let s = Scaler::fit(&ws, 2);
        let all: Vec<f64> = ws.iter().flat_map(|w| s.transform(&w.data)).collect();
        for j in 0..2 {
            let col: Vec<f64> = all.iter().skip(j).step_by(2).copied().collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(m.abs() < 1e-10);
            assert!((v.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_column_is_flagged_and_zeroed() {
        let ws = vec![win(vec![1.0, 7.0, 2.0, 7.0]), win(vec![4.0, 7.0])];
        let s = Scaler::fit(&ws, 2);
        assert_eq!(s.degenerate, vec![1]);
        assert_eq!(s.std[1], 1.0);
        let out = s.transform(&[5.0, 7.0]);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn shift_moves_output_by_c_over_std() {
        let ws = vec![win(vec![1.0, 2.0, 4.0, 8.0])];
        let s = Scaler::fit(&ws, 1);
        let base = s.transform(&[3.0]);
        let shifted = s.transform(&[3.0 + 2.5]);
        assert!((shifted[0] - base[0] - 2.5 / s.std[0]).abs() < 1e-12);
    }
}
