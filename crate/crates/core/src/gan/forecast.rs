use serde::{Deserialize, Serialize};

use super::nets::{point_forecast, Generator};
use crate::data::{
    make_windows, AlignedDataset, SentimentMode, WindowSample, CLOSE, FEATURES, HOLDOUT_LEN,
};
use crate::error::{Error, Result};
use crate::eval::ForecastRow;
use crate::numkernel::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutForecast {
    pub rows: Vec<ForecastRow>,
    /// Scaled context entries pulled back into `[−1, 1]` because the holdout
    /// left the training range.
    pub clipped_inputs: usize,
}

fn clip(values: &mut [f64]) -> usize {
    let mut n = 0;
    for v in values {
        if v.abs() > 1.0 {
            *v = v.clamp(-1.0, 1.0);
            n += 1;
        }
    }
    n
}

/// The last `HOLDOUT_LEN` windows of `aligned`.
pub fn holdout_windows(
    aligned: &AlignedDataset,
    window: usize,
    mode: SentimentMode,
) -> Result<Vec<WindowSample>> {
    if aligned.len() < window + HOLDOUT_LEN {
        return Err(Error::Insufficient(format!(
            "{}: {} rows cannot supply {} days of history before a {}-day holdout",
            aligned.symbol,
            aligned.len(),
            window,
            HOLDOUT_LEN
        )));
    }
    let mut all = make_windows(aligned, window, mode)?;
    Ok(all.split_off(all.len() - HOLDOUT_LEN))
}

/// One-step close forecasts over the final 20 days. Teacher-forced by
/// default: each context is the real history. With `autoregressive` the
/// generated rows replace real ones as they become context.
pub fn forecast_holdout(
    gen: &Generator,
    aligned: &AlignedDataset,
    mode: SentimentMode,
    autoregressive: bool,
) -> Result<HoldoutForecast> {
    forecast_windows(
        gen,
        &holdout_windows(aligned, gen.window, mode)?,
        autoregressive,
    )
}

/// One-step close forecasts for consecutive raw windows.
pub fn forecast_windows(
    gen: &Generator,
    windows: &[WindowSample],
    autoregressive: bool,
) -> Result<HoldoutForecast> {
    let scaler = gen.scaler()?;
    let first = windows
        .first()
        .ok_or_else(|| Error::Insufficient("no windows to forecast".into()))?;
    let mut clipped_inputs = 0;
    let mut rows = Vec::with_capacity(windows.len());
    let mut context = scaler.transform(&first.history)?;
    for w in windows {
        if w.history.rows() != gen.window {
            return Err(Error::dimension(
                "window length",
                gen.window,
                w.history.rows(),
            ));
        }
        if !autoregressive {
            context = scaler.transform(&w.history)?;
        }
        let mut scaled = context.clone();
        clipped_inputs += clip(scaled.data_mut());
        let input = WindowSample {
            history: scaled,
            ..w.clone()
        };
        let out = point_forecast(gen, &input)?;
        rows.push(ForecastRow {
            date: w.target_date,
            context_end: w.context_end,
            predicted: scaler.inverse_value(CLOSE, out[CLOSE]),
            actual: w.target[CLOSE],
        });
        if autoregressive {
            let mut next = context.data()[FEATURES..].to_vec();
            next.extend_from_slice(&out);
            context = Matrix::from_vec(gen.window, FEATURES, next)?;
        }
    }
    Ok(HoldoutForecast {
        rows,
        clipped_inputs,
    })
}

/// Mean absolute change of the generated close (scaled units) over the
/// holdout when the sentiment input is negated.
pub fn sentiment_sensitivity(
    gen: &Generator,
    aligned: &AlignedDataset,
    mode: SentimentMode,
) -> Result<f64> {
    let scaler = gen.scaler()?;
    let windows = holdout_windows(aligned, gen.window, mode)?;
    let mut total = 0.0;
    for w in &windows {
        let mut history = scaler.transform(&w.history)?;
        clip(history.data_mut());
        let a = WindowSample {
            history,
            ..w.clone()
        };
        let b = WindowSample {
            sentiment: -w.sentiment,
            ..a.clone()
        };
        total += (point_forecast(gen, &a)?[CLOSE] - point_forecast(gen, &b)?[CLOSE]).abs();
    }
    Ok(total / windows.len() as f64)
}
