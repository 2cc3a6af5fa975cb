use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, Metrics};
use crate::data::SplitPolicy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Arima,
    Lstm,
    Gan,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Arima, ModelKind::Lstm, ModelKind::Gan];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Arima => "arima",
            ModelKind::Lstm => "lstm",
            ModelKind::Gan => "gan",
        }
    }

    /// Evaluation split used by each model's protocol.
    pub fn default_split(self) -> SplitPolicy {
        match self {
            ModelKind::Arima => SplitPolicy::Fraction90_10,
            ModelKind::Lstm => SplitPolicy::Fraction70_30,
            ModelKind::Gan => SplitPolicy::HoldoutLast20,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arima" => Ok(ModelKind::Arima),
            "lstm" => Ok(ModelKind::Lstm),
            "gan" => Ok(ModelKind::Gan),
            other => Err(Error::Usage(format!(
                "unknown model `{other}` (expected arima, lstm or gan)"
            ))),
        }
    }
}

/// One held-out prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub date: NaiveDate,
    /// Latest date whose data the prediction used.
    pub context_end: NaiveDate,
    pub predicted: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub symbol: String,
    pub model: ModelKind,
    pub split: SplitPolicy,
    pub rows: Vec<ForecastRow>,
    pub metrics: Metrics,
}

impl ForecastReport {
    pub fn new(
        symbol: impl Into<String>,
        model: ModelKind,
        split: SplitPolicy,
        rows: Vec<ForecastRow>,
    ) -> Result<Self> {
        let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
        let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
        let metrics = metrics(&predicted, &actual)?;
        let report = Self {
            symbol: symbol.into(),
            model,
            split,
            rows,
            metrics,
        };
        report.audit_causality()?;
        Ok(report)
    }

    /// Every prediction used only data dated before its target, and targets
    /// are strictly increasing.
    pub fn audit_causality(&self) -> Result<()> {
        for r in &self.rows {
            if r.context_end >= r.date {
                return Err(Error::Data(format!(
                    "{} {}: prediction for {} used data dated {}",
                    self.symbol, self.model, r.date, r.context_end
                )));
            }
        }
        if let Some(p) = self.rows.windows(2).find(|p| p[1].date <= p[0].date) {
            return Err(Error::Data(format!(
                "{} {}: report rows out of order at {}",
                self.symbol, self.model, p[1].date
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// CSV `date,actual,predicted`.
    pub fn write_plot_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["date", "actual", "predicted"])?;
        for r in &self.rows {
            w.write_record([
                r.date.to_string(),
                r.actual.to_string(),
                r.predicted.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(d: u32, ctx: u32, p: f64, a: f64) -> ForecastRow {
        ForecastRow {
            date: NaiveDate::from_ymd_opt(2024, 1, d).unwrap(),
            context_end: NaiveDate::from_ymd_opt(2024, 1, ctx).unwrap(),
            predicted: p,
            actual: a,
        }
    }

    #[test]
    fn audit_rejects_lookahead() {
        let err = ForecastReport::new(
            "X",
            ModelKind::Gan,
            SplitPolicy::HoldoutLast20,
            vec![row(3, 3, 1.0, 1.0)],
        );
        assert!(err.is_err());
        assert!(ForecastReport::new(
            "X",
            ModelKind::Gan,
            SplitPolicy::HoldoutLast20,
            vec![row(3, 2, 1.0, 1.0)]
        )
        .is_ok());
    }

    #[test]
    fn audit_rejects_shuffled_rows() {
        let rows = vec![row(5, 4, 1.0, 1.0), row(3, 2, 1.0, 1.0)];
        assert!(
            ForecastReport::new("X", ModelKind::Lstm, SplitPolicy::Fraction70_30, rows).is_err()
        );
    }

    #[test]
    fn json_round_trip() {
        let r = ForecastReport::new(
            "X",
            ModelKind::Arima,
            SplitPolicy::Fraction90_10,
            vec![row(3, 2, 1.5, 1.0), row(4, 3, 2.0, 2.5)],
        )
        .unwrap();
        let back: ForecastReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn plot_csv() {
        let r = ForecastReport::new(
            "X",
            ModelKind::Gan,
            SplitPolicy::HoldoutLast20,
            vec![row(3, 2, 1.5, 1.0)],
        )
        .unwrap();
        let mut out = Vec::new();
        r.write_plot_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "date,actual,predicted\n2024-01-03,1,1.5\n"
        );
    }

    #[test]
    fn model_names() {
        assert_eq!("GAN".parse::<ModelKind>().unwrap(), ModelKind::Gan);
        assert!(matches!("svm".parse::<ModelKind>(), Err(Error::Usage(_))));
    }
}
