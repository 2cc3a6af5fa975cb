use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// train min → 0, train max → 1
    MinmaxUnit,
    /// train min → −1, train max → +1
    MinmaxSigned,
}

impl ScaleMode {
    fn midpoint(self) -> f64 {
        match self {
            ScaleMode::MinmaxUnit => 0.5,
            ScaleMode::MinmaxSigned => 0.0,
        }
    }
}

/// Label recorded on every fitted scaler. Only training partitions are ever
/// used for fitting.
pub const TRAIN_PARTITION: &str = "train";

/// Per-feature min-max scaler.
///
/// Values outside the fitted range are mapped linearly, never clipped, so
/// test rows beyond the training extremes land outside `[0, 1]` / `[−1, 1]`.
/// A constant feature maps to the range midpoint and inverts to its constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mode: ScaleMode,
    pub per_feature_min: Vec<f64>,
    pub per_feature_max: Vec<f64>,
    pub fitted_on: String,
}

impl ScalerParams {
    /// Fit on the rows of a training partition.
    pub fn fit(train: &Matrix, mode: ScaleMode) -> Result<Self> {
        if train.rows() == 0 || train.cols() == 0 {
            return Err(Error::Insufficient(
                "cannot fit a scaler on empty data".into(),
            ));
        }
        let mut lo = vec![f64::INFINITY; train.cols()];
        let mut hi = vec![f64::NEG_INFINITY; train.cols()];
        for r in 0..train.rows() {
            for (c, &v) in train.row(r).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value at row {r}, column {c}"
                    )));
                }
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        Ok(Self {
            mode,
            per_feature_min: lo,
            per_feature_max: hi,
            fitted_on: TRAIN_PARTITION.to_string(),
        })
    }

    pub fn features(&self) -> usize {
        self.per_feature_min.len()
    }

    pub fn is_degenerate(&self, feature: usize) -> bool {
        self.per_feature_max[feature] <= self.per_feature_min[feature]
    }

    #[inline]
    pub fn transform_value(&self, feature: usize, x: f64) -> f64 {
        let (lo, hi) = (self.per_feature_min[feature], self.per_feature_max[feature]);
        if hi <= lo {
            return self.mode.midpoint();
        }
        let unit = (x - lo) / (hi - lo);
        match self.mode {
            ScaleMode::MinmaxUnit => unit,
            ScaleMode::MinmaxSigned => 2.0 * unit - 1.0,
        }
    }

    #[inline]
    pub fn inverse_value(&self, feature: usize, y: f64) -> f64 {
        let (lo, hi) = (self.per_feature_min[feature], self.per_feature_max[feature]);
        if hi <= lo {
            return lo;
        }
        let unit = match self.mode {
            ScaleMode::MinmaxUnit => y,
            ScaleMode::MinmaxSigned => (y + 1.0) / 2.0,
        };
        lo + unit * (hi - lo)
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_cols(row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(c, &v)| self.transform_value(c, v))
            .collect())
    }

    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_cols(row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(c, &v)| self.inverse_value(c, v))
            .collect())
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        self.map_matrix(data, Self::transform_value)
    }

    pub fn inverse(&self, data: &Matrix) -> Result<Matrix> {
        self.map_matrix(data, Self::inverse_value)
    }

    fn map_matrix(&self, data: &Matrix, f: fn(&Self, usize, f64) -> f64) -> Result<Matrix> {
        self.check_cols(data.cols())?;
        let mut out = data.clone();
        let cols = data.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v = f(self, i % cols, *v);
        }
        Ok(out)
    }

    fn check_cols(&self, cols: usize) -> Result<()> {
        if cols != self.features() {
            return Err(Error::dimension("scaler columns", self.features(), cols));
        }
        Ok(())
    }
}
