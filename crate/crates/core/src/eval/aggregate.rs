use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::report::{ForecastReport, ModelKind};
use crate::error::{Error, Result};

/// One (asset, model) entry of a metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub asset: String,
    pub model: ModelKind,
    pub rmse: f64,
    #[serde(default)]
    pub mae: Option<f64>,
    #[serde(default)]
    pub mse: Option<f64>,
    #[serde(default)]
    pub mape: Option<f64>,
}

impl From<&ForecastReport> for MetricRow {
    fn from(r: &ForecastReport) -> Self {
        Self {
            asset: r.symbol.clone(),
            model: r.model,
            rmse: r.metrics.rmse,
            mae: Some(r.metrics.mae),
            mse: Some(r.metrics.mse),
            mape: r.metrics.mape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub mean_rmse: f64,
    pub median_rmse: f64,
    pub wins: usize,
}

/// Assets on which several models share the minimal RMSE exactly; each of
/// them is credited with a win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tie {
    pub asset: String,
    pub models: Vec<ModelKind>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub assets: usize,
    pub models: Vec<ModelSummary>,
    pub ties: Vec<Tie>,
}

/// Middle value, or the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Cross-asset summary of per-(asset, model) RMSE values. Every asset must
/// carry exactly one row for every model that appears anywhere.
pub fn aggregate_rows(rows: &[MetricRow]) -> Result<AggregateReport> {
    if rows.is_empty() {
        return Err(Error::Insufficient("nothing to aggregate".into()));
    }
    let models: BTreeSet<ModelKind> = rows.iter().map(|r| r.model).collect();
    let mut grid: BTreeMap<&str, BTreeMap<ModelKind, f64>> = BTreeMap::new();
    let mut asset_order: Vec<&str> = Vec::new();
    for r in rows {
        if !r.rmse.is_finite() || r.rmse < 0.0 {
            return Err(Error::Data(format!(
                "{} {}: invalid RMSE {}",
                r.asset, r.model, r.rmse
            )));
        }
        let cell = grid.entry(&r.asset).or_insert_with(|| {
            asset_order.push(&r.asset);
            BTreeMap::new()
        });
        if cell.insert(r.model, r.rmse).is_some() {
            return Err(Error::Data(format!(
                "duplicate entry for {} {}",
                r.asset, r.model
            )));
        }
    }
    for asset in &asset_order {
        let cell = &grid[asset];
        if let Some(missing) = models.iter().find(|m| !cell.contains_key(m)) {
            return Err(Error::Data(format!(
                "missing {missing} result for asset {asset}"
            )));
        }
    }

    let mut wins: BTreeMap<ModelKind, usize> = BTreeMap::new();
    let mut ties = Vec::new();
    for asset in &asset_order {
        let cell = &grid[asset];
        let best = cell.values().copied().fold(f64::INFINITY, f64::min);
        let winners: Vec<ModelKind> = cell
            .iter()
            .filter(|(_, &v)| v == best)
            .map(|(&m, _)| m)
            .collect();
        for m in &winners {
            *wins.entry(*m).or_default() += 1;
        }
        if winners.len() > 1 {
            log::warn!("{asset}: RMSE tie between {winners:?}");
            ties.push(Tie {
                asset: asset.to_string(),
                models: winners,
                rmse: best,
            });
        }
    }

    let summaries = models
        .iter()
        .map(|&m| {
            let values: Vec<f64> = asset_order.iter().map(|a| grid[a][&m]).collect();
            ModelSummary {
                model: m,
                mean_rmse: values.iter().sum::<f64>() / values.len() as f64,
                median_rmse: median(&values).expect("at least one asset"),
                wins: wins.get(&m).copied().unwrap_or(0),
            }
        })
        .collect();
    Ok(AggregateReport {
        assets: asset_order.len(),
        models: summaries,
        ties,
    })
}

pub fn aggregate(reports: &[ForecastReport]) -> Result<AggregateReport> {
    let rows: Vec<MetricRow> = reports.iter().map(MetricRow::from).collect();
    aggregate_rows(&rows)
}

impl AggregateReport {
    pub fn model(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|s| s.model == model)
    }

    /// CSV `model,mean_rmse,median_rmse,wins`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["model", "mean_rmse", "median_rmse", "wins"])?;
        for s in &self.models {
            w.write_record([
                s.model.name().to_string(),
                format!("{:.4}", s.mean_rmse),
                format!("{:.4}", s.median_rmse),
                s.wins.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width text table with two decimals.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<8}{:>12}{:>14}{:>6}\n",
            "Model", "Mean RMSE", "Median RMSE", "Wins"
        );
        for s in &self.models {
            out += &format!(
                "{:<8}{:>12.2}{:>14.2}{:>6}\n",
                s.model.name().to_uppercase(),
                s.mean_rmse,
                s.median_rmse,
                s.wins
            );
        }
        out
    }
}

fn optional(field: &str) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() || f == "-" {
        return Ok(None);
    }
    f.parse()
        .map(Some)
        .map_err(|_| Error::Data(format!("`{f}` is not a number")))
}

/// Reads a metric table with columns `asset,model,rmse` and optionally
/// `mae`, `mse`, `mape` in any order; empty cells and `-` mean absent.
pub fn read_metric_rows<R: Read>(source: R) -> Result<Vec<MetricRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (asset, model, rmse) = match (col("asset"), col("model"), col("rmse")) {
        (Some(a), Some(m), Some(r)) => (a, m, r),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "metric table needs asset, model and rmse columns".into(),
            })
        }
    };
    let (mae, mse, mape) = (col("mae"), col("mse"), col("mape"));
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let field = |idx: Option<usize>| idx.and_then(|c| record.get(c)).unwrap_or("");
        let wrap = |e: Error| Error::Parse {
            line,
            message: e.to_string(),
        };
        rows.push(MetricRow {
            asset: field(Some(asset)).to_string(),
            model: field(Some(model)).parse().map_err(wrap)?,
            rmse: optional(field(Some(rmse)))
                .map_err(wrap)?
                .ok_or_else(|| Error::Parse {
                    line,
                    message: "missing rmse".into(),
                })?,
            mae: optional(field(mae)).map_err(wrap)?,
            mse: optional(field(mse)).map_err(wrap)?,
            mape: optional(field(mape)).map_err(wrap)?,
        });
    }
    Ok(rows)
}

/// Writes `asset,model,mae,rmse,mse,mape`, readable by [`read_metric_rows`].
pub fn write_metric_rows<W: Write>(rows: &[MetricRow], sink: W) -> Result<()> {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["asset", "model", "mae", "rmse", "mse", "mape"])?;
    for r in rows {
        w.write_record([
            r.asset.clone(),
            r.model.name().to_string(),
            cell(r.mae),
            r.rmse.to_string(),
            cell(r.mse),
            cell(r.mape),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-asset table with one column group per model, in the order given.
pub fn render_metric_grid(rows: &[MetricRow]) -> String {
    let mut assets: Vec<&str> = Vec::new();
    for r in rows {
        if !assets.contains(&r.asset.as_str()) {
            assets.push(&r.asset);
        }
    }
    let num = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<10}{:<7}{:>10}{:>10}{:>12}{:>8}\n",
        "Asset", "Model", "MAE", "RMSE", "MSE", "MAPE"
    );
    for a in assets {
        for r in rows.iter().filter(|r| r.asset == a) {
            out += &format!(
                "{:<10}{:<7}{:>10}{:>10.2}{:>12}{:>8}\n",
                a,
                r.model.name().to_uppercase(),
                num(r.mae),
                r.rmse,
                num(r.mse),
                num(r.mape)
            );
        }
    }
    out
}
