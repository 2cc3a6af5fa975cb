use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::bar::{Bar, RawBar, RawSeries, Series, FEATURES, FEATURE_NAMES, HIGH, LOW, VOLUME};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    ForwardFilled,
    ZeroFilled,
    DroppedLeadingRow,
    WidenedRange,
}

/// One repair, written as a JSON line `{date, field, action}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairEntry {
    pub date: NaiveDate,
    pub field: String,
    pub action: RepairAction,
}

/// Fills missing fields so the series is complete.
///
/// Prices are forward-filled from the previous trading day, missing volume
/// becomes 0, and rows missing a price before any earlier value exists are
/// dropped. When a filled price falls outside that day's `[low, high]`, the
/// range is widened to include it.
pub fn repair_missing(raw: &RawSeries) -> Result<(Series, Vec<RepairEntry>)> {
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        if k != VOLUME && !raw.rows.is_empty() && raw.rows.iter().all(|r| r.fields()[k].is_none()) {
            return Err(Error::Data(format!(
                "{}: column `{name}` is entirely empty",
                raw.symbol
            )));
        }
    }
    let mut log = Vec::new();
    let mut last: [Option<f64>; FEATURES] = [None; FEATURES];
    let mut bars = Vec::with_capacity(raw.rows.len());
    for row in &raw.rows {
        let fields = row.fields();
        if let Some(k) =
            (0..FEATURES).find(|&k| k != VOLUME && fields[k].is_none() && last[k].is_none())
        {
            log.push(RepairEntry {
                date: row.date,
                field: FEATURE_NAMES[k].to_string(),
                action: RepairAction::DroppedLeadingRow,
            });
            continue;
        }
        let mut fixed: RawBar = *row;
        let mut filled = [false; FEATURES];
        for k in 0..FEATURES {
            if fields[k].is_some() {
                continue;
            }
            let (value, action) = if k == VOLUME {
                (0.0, RepairAction::ZeroFilled)
            } else {
                (last[k].expect("checked above"), RepairAction::ForwardFilled)
            };
            fixed.set_field(k, value);
            filled[k] = true;
            log.push(RepairEntry {
                date: row.date,
                field: FEATURE_NAMES[k].to_string(),
                action,
            });
        }
        let f = fixed.fields().map(|v| v.expect("all fields filled"));
        let lo = f[0..4].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f[0..4].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if filled.iter().any(|&x| x) {
            if lo < f[LOW] {
                fixed.set_field(LOW, lo);
                log.push(RepairEntry {
                    date: row.date,
                    field: "low".into(),
                    action: RepairAction::WidenedRange,
                });
            }
            if hi > f[HIGH] {
                fixed.set_field(HIGH, hi);
                log.push(RepairEntry {
                    date: row.date,
                    field: "high".into(),
                    action: RepairAction::WidenedRange,
                });
            }
        }
        let f = fixed.fields().map(|v| v.expect("all fields filled"));
        for k in 0..FEATURES {
            last[k] = Some(f[k]);
        }
        bars.push(Bar {
            date: row.date,
            open: f[0],
            high: f[1],
            low: f[2],
            close: f[3],
            adj_close: f[4],
            volume: f[5],
        });
    }
    Ok((Series::new(raw.symbol.clone(), bars)?, log))
}

pub fn write_repair_log<W: Write>(log: &[RepairEntry], mut sink: W) -> Result<()> {
    for entry in log {
        serde_json::to_writer(&mut sink, entry)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}
