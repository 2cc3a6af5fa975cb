use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 5% critical value for the constant-only Dickey-Fuller regression.
pub const ADF_CRITICAL_5PCT: f64 = -2.86;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfDiagnostic {
    /// The series is constant; no test statistic exists.
    ZeroVariance,
    /// The regression design is rank deficient or fits exactly.
    DegenerateRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag: usize,
    pub is_stationary: bool,
    pub diagnostic: Option<AdfDiagnostic>,
}

impl AdfResult {
    fn degenerate(lag: usize, diagnostic: AdfDiagnostic) -> Self {
        Self {
            statistic: 0.0,
            lag,
            is_stationary: false,
            diagnostic: Some(diagnostic),
        }
    }
}

/// `⌊n^{1/3}⌋`.
pub fn default_lag(n: usize) -> usize {
    let mut k = (n as f64).cbrt().floor() as usize;
    // Guard against cbrt rounding just below an exact cube.
    while (k + 1).pow(3) <= n {
        k += 1;
    }
    k
}

/// Augmented Dickey-Fuller test with a constant and `lag` lagged differences:
/// `Δyₜ = α + γ yₜ₋₁ + Σ βᵢ Δyₜ₋ᵢ + εₜ`, statistic `γ̂ / se(γ̂)`.
pub fn adf_test(series: &[f64], lag: usize) -> Result<AdfResult> {
    let n = series.len();
    if n <= lag + 10 {
        return Err(Error::Insufficient(format!(
            "stationarity test with lag {lag} needs more than {} observations, got {n}",
            lag + 10
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "stationarity test input contains non-finite values".into(),
        ));
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Ok(AdfResult::degenerate(lag, AdfDiagnostic::ZeroVariance));
    }

    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // Regression rows use Δy at indices lag..diff.len().
    let rows = diff.len() - lag;
    let cols = 2 + lag;
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + lag;
        match c {
            0 => 1.0,
            1 => series[t],
            k => diff[t - (k - 1)],
        }
    });
    let y = DVector::from_iterator(rows, diff[lag..].iter().copied());

    let xtx = x.transpose() * &x;
    let Some(chol) = xtx.clone().cholesky() else {
        return Ok(AdfResult::degenerate(
            lag,
            AdfDiagnostic::DegenerateRegression,
        ));
    };
    let beta = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * &beta;
    let dof = (rows - cols) as f64;
    let s2 = resid.norm_squared() / dof;
    let scale = y.norm_squared().max(1e-300) / rows as f64;
    if s2 <= 1e-24 * scale {
        return Ok(AdfResult::degenerate(
            lag,
            AdfDiagnostic::DegenerateRegression,
        ));
    }
    let inv = chol.inverse();
    let se = (s2 * inv[(1, 1)]).sqrt();
    let statistic = beta[1] / se;
    if !statistic.is_finite() {
        return Ok(AdfResult::degenerate(
            lag,
            AdfDiagnostic::DegenerateRegression,
        ));
    }
    Ok(AdfResult {
        statistic,
        lag,
        is_stationary: statistic < ADF_CRITICAL_5PCT,
        diagnostic: None,
    })
}

/// [`adf_test`] at the default lag for the series length.
pub fn adf_default(series: &[f64]) -> Result<AdfResult> {
    adf_test(series, default_lag(series.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn lag_rule() {
        assert_eq!(default_lag(500), 7);
        assert_eq!(default_lag(1000), 10);
        assert_eq!(default_lag(27), 3);
        assert_eq!(default_lag(26), 2);
    }

    #[test]
    fn white_noise_rejects_unit_root() {
        let hits = (0..100)
            .filter(|&s| {
                adf_default(&synth::white_noise(s, 500, 0.0, 1.0))
                    .unwrap()
                    .is_stationary
            })
            .count();
        assert!(hits > 95, "{hits}/100");
    }

    #[test]
    fn random_walk_keeps_unit_root() {
        let kept = (0..100)
            .filter(|&s| {
                !adf_default(&synth::random_walk(1000 + s, 500, 0.0, 1.0))
                    .unwrap()
                    .is_stationary
            })
            .count();
        assert!(kept >= 90, "{kept}/100");
    }

    #[test]
    fn constant_series_is_flagged() {
        let r = adf_test(&[5.0; 40], 2).unwrap();
        assert!(!r.is_stationary);
        assert_eq!(r.diagnostic, Some(AdfDiagnostic::ZeroVariance));
    }

    #[test]
    fn exact_line_is_degenerate() {
        let line: Vec<f64> = (0..60).map(|t| 2.0 * t as f64).collect();
        let r = adf_test(&line, 1).unwrap();
        assert_eq!(r.diagnostic, Some(AdfDiagnostic::DegenerateRegression));
    }

    #[test]
    fn short_series_errors() {
        assert!(adf_test(&[1.0, 2.0, 3.0], 0).is_err());
    }

    /// Independent closed form for lag 0: the slope t-statistic of Δy on y₋₁.
    #[test]
    fn lag_zero_matches_simple_regression() {
        let y = synth::ar1(5, 200, 0.0, 0.5, 1.0);
        let xs: Vec<f64> = y[..y.len() - 1].to_vec();
        let ys: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let b = sxy / sxx;
        let a = my - b * mx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - a - b * x).powi(2))
            .sum();
        let t = b / (rss / (n - 2.0) / sxx).sqrt();
        let r = adf_test(&y, 0).unwrap();
        assert!(
            (r.statistic - t).abs() < 1e-9 * t.abs(),
            "{} vs {t}",
            r.statistic
        );
    }
}
