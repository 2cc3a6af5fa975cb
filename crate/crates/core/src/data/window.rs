use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::align::AlignedDataset;
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, ScaleMode, ScalerParams};

/// Default history length in trading days.
pub const DEFAULT_WINDOW: usize = 20;

/// Which sentiment value accompanies a window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentMode {
    /// Sentiment of the last history day.
    #[default]
    LastDay,
    /// Mean sentiment over the whole window.
    WindowMean,
}

/// Supervised sample: `L` days of history, sentiment, and the next day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    /// `L × 6`, oldest row first.
    pub history: Matrix,
    pub sentiment: f64,
    pub target: Vec<f64>,
    pub target_date: NaiveDate,
    /// Date of the last history row; no information after it is used.
    pub context_end: NaiveDate,
    /// Row index of the target in the source dataset.
    pub target_index: usize,
}

impl WindowSample {
    pub fn window_len(&self) -> usize {
        self.history.rows()
    }
}

/// Fits a scaler on every row (history and target) the samples touch.
pub fn fit_window_scaler(samples: &[WindowSample], mode: ScaleMode) -> Result<ScalerParams> {
    let mut rows = Vec::new();
    for s in samples {
        for r in 0..s.history.rows() {
            rows.push(s.history.row(r).to_vec());
        }
        rows.push(s.target.clone());
    }
    if rows.is_empty() {
        return Err(Error::Insufficient(
            "no training windows to fit a scaler on".into(),
        ));
    }
    ScalerParams::fit(&Matrix::from_rows(&rows)?, mode)
}

/// Sliding stride-1 windows: sample `i` has history rows `[i, i+L)` and
/// target row `i+L`, giving `T − L` samples.
pub fn make_windows(
    aligned: &AlignedDataset,
    window: usize,
    mode: SentimentMode,
) -> Result<Vec<WindowSample>> {
    let t = aligned.len();
    if window == 0 {
        return Err(Error::Usage("window length must be at least 1".into()));
    }
    if t < window + 1 {
        return Err(Error::Insufficient(format!(
            "{}: {} rows but a window of {} needs at least {}",
            aligned.symbol,
            t,
            window,
            window + 1
        )));
    }
    Ok((0..t - window)
        .map(|i| {
            let end = i + window;
            let sentiment = match mode {
                SentimentMode::LastDay => aligned.sentiment[end - 1],
                SentimentMode::WindowMean => {
                    aligned.sentiment[i..end].iter().sum::<f64>() / window as f64
                }
            };
            WindowSample {
                history: aligned.features.slice_rows(i, end),
                sentiment,
                target: aligned.features.row(end).to_vec(),
                target_date: aligned.dates[end],
                context_end: aligned.dates[end - 1],
                target_index: end,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::bar::CLOSE;

    pub(crate) fn dataset(t: usize) -> AlignedDataset {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let mut data = Vec::new();
        for i in 0..t {
            let c = 100.0 + i as f64;
            data.extend_from_slice(&[c, c + 1.0, c - 1.0, c, c, 1000.0 + i as f64]);
        }
        AlignedDataset {
            symbol: "T".into(),
            dates: (0..t)
                .map(|i| start + chrono::Days::new(i as u64))
                .collect(),
            features: Matrix::from_vec(t, 6, data).unwrap(),
            sentiment: (0..t).map(|i| (i as f64 / 10.0).sin()).collect(),
        }
    }

    #[test]
    fn count_is_t_minus_l() {
        let w = make_windows(&dataset(25), 20, SentimentMode::LastDay).unwrap();
        assert_eq!(w.len(), 5);
    }

    #[test]
    fn windows_overlap_by_l_minus_one() {
        let w = make_windows(&dataset(25), 20, SentimentMode::LastDay).unwrap();
        assert_eq!(
            w[0].history.slice_rows(1, 20),
            w[1].history.slice_rows(0, 19)
        );
    }

    #[test]
    fn last_target_is_last_date() {
        let d = dataset(25);
        let w = make_windows(&d, 20, SentimentMode::LastDay).unwrap();
        assert_eq!(w.last().unwrap().target_date, *d.dates.last().unwrap());
        assert!(w.iter().all(|s| s.context_end < s.target_date));
        assert_eq!(w[0].sentiment, d.sentiment[19]);
    }

    #[test]
    fn too_short_reports_minimum() {
        let err = make_windows(&dataset(20), 20, SentimentMode::LastDay).unwrap_err();
        assert!(err.to_string().contains("at least 21"));
    }

    #[test]
    fn targets_reconstruct_close_column() {
        let d = dataset(40);
        let w = make_windows(&d, 5, SentimentMode::WindowMean).unwrap();
        let closes: Vec<f64> = w.iter().map(|s| s.target[CLOSE]).collect();
        assert_eq!(closes, d.closes()[5..].to_vec());
    }
}
