use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point-forecast error summary. MAPE is a fraction, absent when any actual
/// value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub mape_omitted: bool,
}

pub fn metrics(predicted: &[f64], actual: &[f64]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::dimension(
            "predicted vs actual length",
            actual.len(),
            predicted.len(),
        ));
    }
    if actual.is_empty() {
        return Err(Error::Insufficient(
            "metrics need at least one observation".into(),
        ));
    }
    if predicted.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "metrics input contains non-finite values".into(),
        ));
    }
    let n = actual.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        let e = p - a;
        abs += e.abs();
        sq += e * e;
    }
    let mse = sq / n;
    let mape_omitted = actual.contains(&0.0);
    let mape = (!mape_omitted).then(|| {
        predicted
            .iter()
            .zip(actual)
            .map(|(p, a)| ((p - a) / a).abs())
            .sum::<f64>()
            / n
    });
    Ok(Metrics {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
        mape,
        mape_omitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_forecast() {
        let m = metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse, m.mape), (0.0, 0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn hand_arithmetic() {
        let m = metrics(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m.mae - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.mse - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.rmse - 0.5774).abs() < 5e-5);
        assert!((m.mape.unwrap() - 0.1111).abs() < 5e-5);
    }

    #[test]
    fn zero_actual_omits_mape() {
        let m = metrics(&[1.0, 1.0], &[0.0, 2.0]).unwrap();
        assert!(m.mape_omitted && m.mape.is_none());
        assert_eq!(m.mae, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(metrics(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn coherence_and_scale_equivariance(
            pairs in proptest::collection::vec((1.0f64..500.0, 1.0f64..500.0), 1..60),
            c in 0.01f64..100.0,
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = metrics(&p, &a).unwrap();
            prop_assert!((m.rmse * m.rmse - m.mse).abs() <= 1e-9 * m.mse.max(1.0));
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
            let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
            let as_: Vec<f64> = a.iter().map(|v| v * c).collect();
            let s = metrics(&ps, &as_).unwrap();
            prop_assert!((s.mae - c * m.mae).abs() <= 1e-9 * (c * m.mae).max(1.0));
            prop_assert!((s.rmse - c * m.rmse).abs() <= 1e-9 * (c * m.rmse).max(1.0));
            prop_assert!((s.mse - c * c * m.mse).abs() <= 1e-9 * (c * c * m.mse).max(1.0));
            prop_assert!((s.mape.unwrap() - m.mape.unwrap()).abs() <= 1e-12);
        }
    }
}
