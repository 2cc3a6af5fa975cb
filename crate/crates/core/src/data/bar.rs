use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expected OHLCV header, also the feature column order everywhere.
pub const OHLCV_HEADER: [&str; 7] = [
    "date",
    "open",
    "high",
    "low",
    "close",
    "adj_close",
    "volume",
];
pub const FEATURE_NAMES: [&str; 6] = ["open", "high", "low", "close", "adj_close", "volume"];
pub const FEATURES: usize = 6;
pub const OPEN: usize = 0;
pub const HIGH: usize = 1;
pub const LOW: usize = 2;
pub const CLOSE: usize = 3;
pub const ADJ_CLOSE: usize = 4;
pub const VOLUME: usize = 5;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// One trading day's market observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl Bar {
    pub fn features(&self) -> [f64; FEATURES] {
        [
            self.open,
            self.high,
            self.low,
            self.close,
            self.adj_close,
            self.volume,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let raw = RawBar::from(*self);
        raw.validate()?;
        for (name, v) in FEATURE_NAMES.iter().zip(raw.fields()) {
            if v.is_none() {
                return Err(invariant(self.date, name, "is missing"));
            }
        }
        Ok(())
    }
}

/// A bar as read from disk; any field may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawBar {
    pub date: NaiveDate,
    pub open: Option<f64>,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub close: Option<f64>,
    pub adj_close: Option<f64>,
    pub volume: Option<f64>,
}

impl From<Bar> for RawBar {
    fn from(b: Bar) -> Self {
        Self {
            date: b.date,
            open: Some(b.open),
            high: Some(b.high),
            low: Some(b.low),
            close: Some(b.close),
            adj_close: Some(b.adj_close),
            volume: Some(b.volume),
        }
    }
}

fn invariant(date: NaiveDate, field: &str, message: &str) -> Error {
    Error::Invariant {
        date: date.format(DATE_FORMAT).to_string(),
        field: field.to_string(),
        message: message.to_string(),
    }
}

impl RawBar {
    pub fn fields(&self) -> [Option<f64>; FEATURES] {
        [
            self.open,
            self.high,
            self.low,
            self.close,
            self.adj_close,
            self.volume,
        ]
    }

    pub fn set_field(&mut self, idx: usize, v: f64) {
        let slot = match idx {
            OPEN => &mut self.open,
            HIGH => &mut self.high,
            LOW => &mut self.low,
            CLOSE => &mut self.close,
            ADJ_CLOSE => &mut self.adj_close,
            _ => &mut self.volume,
        };
        *slot = Some(v);
    }

    /// Checks the invariants that can be checked on the fields present.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in FEATURE_NAMES.iter().zip(self.fields()) {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(invariant(self.date, name, "is not finite"));
                }
                if *name == "volume" {
                    if v < 0.0 {
                        return Err(invariant(self.date, name, "is negative"));
                    }
                } else if v <= 0.0 {
                    return Err(invariant(self.date, name, "must be positive"));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.low, self.high) {
            if hi < lo {
                return Err(invariant(self.date, "high", "is below low"));
            }
            for (name, v) in [("open", self.open), ("close", self.close)] {
                if let Some(v) = v {
                    if v < lo || v > hi {
                        return Err(invariant(self.date, name, "lies outside [low, high]"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Complete, validated daily bars in strictly increasing date order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub symbol: String,
    pub bars: Vec<Bar>,
}

impl Series {
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>) -> Result<Self> {
        for b in &bars {
            b.validate()?;
        }
        for pair in bars.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {}",
                    pair[1].date
                )));
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            bars,
        })
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }
}

/// Bars as read, sorted and de-duplicated, possibly with missing fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub symbol: String,
    pub rows: Vec<RawBar>,
    /// Rows dropped because an earlier row had the same date.
    pub duplicates_dropped: usize,
}

fn parse_field(s: &str, line: usize, name: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("null") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("field `{name}` is not a number: `{s}`"),
    })
}

/// Reads an OHLCV CSV. Rows are sorted by date and duplicate dates are
/// dropped, keeping the first occurrence in file order. Empty fields are
/// kept as missing for [`super::repair_missing`].
pub fn load_ohlcv<R: Read>(source: R, symbol: &str) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != OHLCV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                OHLCV_HEADER.join(","),
                header.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != OHLCV_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    OHLCV_HEADER.len(),
                    record.len()
                ),
            });
        }
        let date =
            NaiveDate::parse_from_str(record[0].trim(), DATE_FORMAT).map_err(|_| Error::Parse {
                line,
                message: format!("invalid date `{}`", &record[0]),
            })?;
        let mut vals = [None; FEATURES];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_field(&record[k + 1], line, FEATURE_NAMES[k])?;
        }
        let bar = RawBar {
            date,
            open: vals[0],
            high: vals[1],
            low: vals[2],
            close: vals[3],
            adj_close: vals[4],
            volume: vals[5],
        };
        bar.validate()?;
        rows.push(bar);
    }
    rows.sort_by_key(|b| b.date);
    let before = rows.len();
    rows.dedup_by_key(|b| b.date);
    let duplicates_dropped = before - rows.len();
    if duplicates_dropped > 0 {
        log::info!("{symbol}: dropped {duplicates_dropped} duplicate rows");
    }
    Ok(RawSeries {
        symbol: symbol.to_string(),
        rows,
        duplicates_dropped,
    })
}

/// Writes a series in the OHLCV CSV format read by [`load_ohlcv`].
pub fn write_ohlcv<W: Write>(series: &Series, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(OHLCV_HEADER)?;
    for b in &series.bars {
        w.write_record([
            b.date.format(DATE_FORMAT).to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.adj_close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "date,open,high,low,close,adj_close,volume\n";

    #[test]
    fn sorts_out_of_order_rows() {
        let csv = format!(
            "{HEADER}2024-01-04,10,11,9,10.5,10.5,100\n2024-01-02,10,11,9,10,10,100\n2024-01-03,10,12,9,11,11,100\n"
        );
        let raw = load_ohlcv(csv.as_bytes(), "T").unwrap();
        let dates: Vec<String> = raw.rows.iter().map(|b| b.date.to_string()).collect();
        assert_eq!(dates, ["2024-01-02", "2024-01-03", "2024-01-04"]);
    }

    #[test]
    fn duplicate_dates_keep_first() {
        let csv = format!("{HEADER}2024-01-02,10,11,9,10,10,100\n2024-01-02,20,21,19,20,20,100\n");
        let raw = load_ohlcv(csv.as_bytes(), "T").unwrap();
        assert_eq!(raw.rows.len(), 1);
        assert_eq!(raw.rows[0].open, Some(10.0));
        assert_eq!(raw.duplicates_dropped, 1);
    }

    #[test]
    fn high_below_low_names_the_date() {
        let csv = format!("{HEADER}2024-01-02,10,8,9,10,10,100\n");
        let err = load_ohlcv(csv.as_bytes(), "T").unwrap_err();
        match err {
            Error::Invariant { date, field, .. } => {
                assert_eq!(date, "2024-01-02");
                assert_eq!(field, "high");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = format!("{HEADER}2024-01-02,10,11,9,10,10,100\n2024-01-03,ten,11,9,10,10,100\n");
        match load_ohlcv(csv.as_bytes(), "T").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            load_ohlcv("date,close\n2024-01-02,1\n".as_bytes(), "T"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
