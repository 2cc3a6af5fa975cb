use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::bar::{Series, CLOSE, FEATURES};
use crate::error::{Error, Result};
use crate::numkernel::Matrix;
use crate::sentiment::DailySentiment;

/// Market features joined with one sentiment value per trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDataset {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    /// `T × 6`, columns open, high, low, close, adj_close, volume.
    pub features: Matrix,
    pub sentiment: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignDiagnostics {
    pub matched: usize,
    /// Sentiment days with no matching bar.
    pub unmatched: usize,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.features.column(CLOSE)
    }

    /// Checks the structural invariants, including strictly increasing dates.
    pub fn validate(&self) -> Result<()> {
        let t = self.dates.len();
        if self.features.rows() != t || self.sentiment.len() != t {
            return Err(Error::Data(format!(
                "{}: {} dates, {} feature rows, {} sentiment values",
                self.symbol,
                t,
                self.features.rows(),
                self.sentiment.len()
            )));
        }
        if self.features.cols() != FEATURES {
            return Err(Error::dimension(
                "aligned feature columns",
                FEATURES,
                self.features.cols(),
            ));
        }
        ensure_chronological(&self.dates)?;
        if !self.features.is_finite() || self.sentiment.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data(format!("{}: non-finite values", self.symbol)));
        }
        Ok(())
    }

    /// Rows `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> AlignedDataset {
        AlignedDataset {
            symbol: self.symbol.clone(),
            dates: self.dates[start..end].to_vec(),
            features: self.features.slice_rows(start, end),
            sentiment: self.sentiment[start..end].to_vec(),
        }
    }
}

/// Errors unless dates are strictly increasing.
pub fn ensure_chronological(dates: &[NaiveDate]) -> Result<()> {
    if let Some(pair) = dates.windows(2).find(|p| p[1] <= p[0]) {
        return Err(Error::Data(format!(
            "data is not in chronological order: {} follows {}",
            pair[1], pair[0]
        )));
    }
    Ok(())
}

/// Joins bars with daily sentiment by date; days without sentiment get 0.
pub fn align(series: &Series, daily: &[DailySentiment]) -> (AlignedDataset, AlignDiagnostics) {
    let dates = series.dates();
    let mut sentiment = vec![0.0; dates.len()];
    let mut diag = AlignDiagnostics::default();
    for d in daily {
        match dates.binary_search(&d.date) {
            Ok(i) => {
                sentiment[i] = d.compound;
                diag.matched += 1;
            }
            Err(_) => diag.unmatched += 1,
        }
    }
    let mut data = Vec::with_capacity(dates.len() * FEATURES);
    for b in &series.bars {
        data.extend_from_slice(&b.features());
    }
    let features = Matrix::from_vec(dates.len(), FEATURES, data).expect("six features per bar");
    (
        AlignedDataset {
            symbol: series.symbol.clone(),
            dates,
            features,
            sentiment,
        },
        diag,
    )
}
