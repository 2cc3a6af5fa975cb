//! Seeded synthetic series used by tests, benchmarks and the bundled fixture.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{AlignedDataset, Bar, Series};
use crate::numkernel::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Gaussian white noise with mean `mean` and standard deviation `sigma`.
pub fn white_noise(seed: u64, n: usize, mean: f64, sigma: f64) -> Vec<f64> {
    normals(&mut rng(seed), n)
        .into_iter()
        .map(|e| mean + sigma * e)
        .collect()
}

/// `yₜ = c + φ yₜ₋₁ + εₜ`, started at the stationary mean after a burn-in.
pub fn ar1(seed: u64, n: usize, c: f64, phi: f64, sigma: f64) -> Vec<f64> {
    const BURN: usize = 200;
    let eps = normals(&mut rng(seed), n + BURN);
    let mut y = c / (1.0 - phi);
    let mut out = Vec::with_capacity(n);
    for (t, e) in eps.into_iter().enumerate() {
        y = c + phi * y + sigma * e;
        if t >= BURN {
            out.push(y);
        }
    }
    out
}

/// `yₜ = c + εₜ + θ εₜ₋₁`.
pub fn ma1(seed: u64, n: usize, c: f64, theta: f64, sigma: f64) -> Vec<f64> {
    let eps = normals(&mut rng(seed), n + 1);
    (1..=n)
        .map(|t| c + sigma * (eps[t] + theta * eps[t - 1]))
        .collect()
}

/// Gaussian random walk starting at `start`.
pub fn random_walk(seed: u64, n: usize, start: f64, sigma: f64) -> Vec<f64> {
    let mut y = start;
    normals(&mut rng(seed), n)
        .into_iter()
        .map(|e| {
            y += sigma * e;
            y
        })
        .collect()
}

/// `n` consecutive weekdays starting at `start` (or the next weekday).
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Wraps a close path into valid OHLCV bars: open is the previous close,
/// high/low straddle both with a small random margin.
pub fn bars_from_closes(seed: u64, symbol: &str, start: NaiveDate, closes: &[f64]) -> Series {
    let mut rng = rng(seed);
    let dates = weekdays(start, closes.len());
    let mut prev = closes.first().copied().unwrap_or(0.0);
    let bars = closes
        .iter()
        .zip(dates)
        .map(|(&close, date)| {
            let open = prev;
            prev = close;
            let spread = 0.002 * close.abs().max(1.0);
            let hi_pad: f64 = rng.random::<f64>() * spread;
            let lo_pad: f64 = rng.random::<f64>() * spread;
            Bar {
                date,
                open,
                high: open.max(close) + hi_pad,
                low: open.min(close) - lo_pad,
                close,
                adj_close: close,
                volume: (1.0e6 * (0.8 + 0.4 * rng.random::<f64>())).round(),
            }
        })
        .collect();
    Series::new(symbol, bars).expect("synthetic bars are valid")
}

/// Sentiment-driven asset: daily sentiment `sₜ ~ U(−1, 1)` and a close that
/// follows an AR(1) around `level` with an extra `+jump·σ` on day `t+1`
/// whenever `sₜ > 0.5`.
pub fn sentiment_jump_asset(
    seed: u64,
    n: usize,
    level: f64,
    phi: f64,
    sigma: f64,
    jump: f64,
) -> AlignedDataset {
    const BURN: usize = 100;
    let mut r = rng(seed);
    let total = n + BURN;
    let sentiment: Vec<f64> = (0..total).map(|_| r.random_range(-1.0..1.0)).collect();
    let eps = normals(&mut r, total);
    let closes = jump_path(&sentiment, &eps, level, phi, sigma, jump);
    let series = bars_from_closes(
        seed ^ 0x9e37_79b9,
        "SYN",
        NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
        &closes[BURN..],
    );
    aligned_from(&series, sentiment[BURN..].to_vec())
}

/// AR(1) deviations around `level` driven by the innovations `eps`, plus
/// `jump·σ` on each day that follows a sentiment above 0.5.
pub fn jump_path(
    sentiment: &[f64],
    eps: &[f64],
    level: f64,
    phi: f64,
    sigma: f64,
    jump: f64,
) -> Vec<f64> {
    let mut y = 0.0;
    (0..eps.len())
        .map(|t| {
            let boost = if t > 0 && sentiment[t - 1] > 0.5 {
                jump * sigma
            } else {
                0.0
            };
            y = phi * y + sigma * eps[t] + boost;
            level + y
        })
        .collect()
}

/// Joins bars with a same-length sentiment vector.
pub fn aligned_from(series: &Series, sentiment: Vec<f64>) -> AlignedDataset {
    assert_eq!(series.len(), sentiment.len(), "one sentiment value per bar");
    let data: Vec<f64> = series.bars.iter().flat_map(|b| b.features()).collect();
    AlignedDataset {
        symbol: series.symbol.clone(),
        dates: series.dates(),
        features: Matrix::from_vec(series.len(), 6, data).expect("six features per bar"),
        sentiment,
    }
}
