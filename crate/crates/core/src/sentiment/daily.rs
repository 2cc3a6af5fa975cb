use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::clean::{clean_text, tokens_to_text};
use super::lexicon::Lexicon;
use super::vader::score_text;
use crate::error::{Error, Result};

/// One scored text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentRecord {
    pub timestamp: NaiveDateTime,
    pub raw_text: String,
    pub compound: f64,
}

/// Aggregated sentiment for one trading day. Days without records are
/// neutral: compound 0 with count 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub date: NaiveDate,
    pub compound: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyAggregation {
    pub days: Vec<DailySentiment>,
    /// Records dated after the last trading day; they have no day to land on.
    pub unassigned: usize,
}

/// Parses an ISO-8601 instant: RFC 3339 with offset (converted to UTC), a
/// naive date-time, or a bare date (midnight).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc).naive_utc());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

#[derive(Debug, Deserialize)]
struct TweetRow {
    timestamp: String,
    text: String,
}

/// Reads a `timestamp,text` CSV, cleans each text and scores it.
pub fn score_tweets<R: Read>(lexicon: &Lexicon, source: R) -> Result<Vec<SentimentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["timestamp", "text"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `timestamp,text`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (idx, row) in reader.deserialize::<TweetRow>().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&row.timestamp).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp `{}`", row.timestamp),
        })?;
        let compound = score_text(lexicon, &tokens_to_text(&clean_text(&row.text)));
        out.push(SentimentRecord {
            timestamp,
            raw_text: row.text,
            compound,
        });
    }
    Ok(out)
}

/// One aggregate per trading day: same-day records are averaged, records on
/// non-trading days roll forward to the next trading day, empty days are 0.
pub fn aggregate_daily(
    records: &[SentimentRecord],
    trading_days: &[NaiveDate],
) -> DailyAggregation {
    let mut sums = vec![0.0; trading_days.len()];
    let mut counts = vec![0usize; trading_days.len()];
    let mut unassigned = 0;
    for r in records {
        let day = r.timestamp.date();
        let slot = trading_days.partition_point(|d| *d < day);
        if slot < trading_days.len() {
            sums[slot] += r.compound;
            counts[slot] += 1;
        } else {
            unassigned += 1;
        }
    }
    let days = trading_days
        .iter()
        .zip(sums.iter().zip(&counts))
        .map(|(&date, (&sum, &count))| DailySentiment {
            date,
            compound: if count == 0 { 0.0 } else { sum / count as f64 },
            sample_count: count,
        })
        .collect();
    DailyAggregation { days, unassigned }
}
