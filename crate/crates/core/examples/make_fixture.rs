//! Regenerates the synthetic seven-asset fixture under `fixtures/synthetic`.
//!
//! Usage: `cargo run --example make_fixture [-- <out-dir>]`

use std::fs;
use std::path::PathBuf;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use sentigan::data::write_ohlcv;
use sentigan::sentiment::{
    aggregate_daily, bundled_lexicon, clean_text, score_text, tokens_to_text, SentimentRecord,
};
use sentigan::synth;

const DAYS: usize = 300;

const ASSETS: [(&str, f64); 7] = [
    ("ALFA", 32.0),
    ("BRVO", 58.0),
    ("CHRL", 121.0),
    ("DLTA", 176.0),
    ("ECHO", 254.0),
    ("FXTR", 338.0),
    ("GOLF", 472.0),
];

const STRONG: [&str; 4] = [
    "{s} crushing it, great earnings and a huge beat! Love it",
    "Amazing quarter from {s}, excellent guidance, very bullish!!",
    "So happy holding {s}, fantastic growth and a strong win",
    "{s} is awesome, best product launch in years :)",
];
const MILD: [&str; 3] = [
    "{s} looks good today",
    "Nice steady gains for {s}",
    "{s} guidance seems fine, cautiously optimistic",
];
const FLAT: [&str; 3] = [
    "{s} trading sideways",
    "Watching {s} into the close",
    "{s} volume about average this week",
];
const NEGATIVE: [&str; 4] = [
    "{s} is a disaster, terrible guidance",
    "Sold my {s}, awful results and weak demand",
    "Not good for {s}, ugly miss and lawsuits",
    "{s} keeps falling, worried about the debt",
];

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    fs::create_dir_all(out.join("data")).unwrap();
    fs::create_dir_all(out.join("tweets")).unwrap();
    let lexicon = bundled_lexicon();
    let start = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    let dates = synth::weekdays(start, DAYS);

    for (k, (sym, level)) in ASSETS.iter().enumerate() {
        let seed = 100 + k as u64;
        let mut rng = synth::rng(seed);
        let mut rows = Vec::new();
        let mut records = Vec::new();
        let mut day = start;
        while day <= *dates.last().unwrap() {
            let weekend = matches!(day.weekday(), Weekday::Sat | Weekday::Sun);
            let count = if weekend {
                usize::from(rng.random::<f64>() < 0.3)
            } else {
                rng.random_range(1..=3)
            };
            let u: f64 = rng.random();
            let bank: &[&str] = match u {
                u if u < 0.2 => &STRONG,
                u if u < 0.45 => &MILD,
                u if u < 0.7 => &FLAT,
                _ => &NEGATIVE,
            };
            for j in 0..count {
                let text = bank[rng.random_range(0..bank.len())].replace("{s}", &format!("${sym}"));
                let ts = day
                    .and_hms_opt(13 + j as u32, rng.random_range(0..60), 0)
                    .unwrap();
                let compound = score_text(&lexicon, &tokens_to_text(&clean_text(&text)));
                records.push(SentimentRecord {
                    timestamp: ts,
                    raw_text: text.clone(),
                    compound,
                });
                rows.push((ts.format("%Y-%m-%dT%H:%M:%SZ").to_string(), text));
            }
            day = day + Days::new(1);
        }
        let daily: Vec<f64> = aggregate_daily(&records, &dates)
            .days
            .iter()
            .map(|d| d.compound)
            .collect();
        let eps = synth::white_noise(seed ^ 0xabcd, DAYS, 0.0, 1.0);
        let closes = synth::jump_path(&daily, &eps, *level, 0.9, 0.01 * level, 3.0);
        let series = synth::bars_from_closes(seed ^ 0x1234, sym, start, &closes);

        let mut csv = Vec::new();
        write_ohlcv(&series, &mut csv).unwrap();
        let mut lines: Vec<String> = String::from_utf8(csv)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        // A few gaps for the repair step: one missing volume, one missing close.
        for (row, field) in [(40 + 7 * k, 6), (150 + k, 4)] {
            let mut cells: Vec<String> = lines[row].split(',').map(String::from).collect();
            cells[field].clear();
            lines[row] = cells.join(",");
        }
        fs::write(
            out.join("data").join(format!("{sym}.csv")),
            lines.join("\n") + "\n",
        )
        .unwrap();

        let mut w = csv::Writer::from_path(out.join("tweets").join(format!("{sym}.csv"))).unwrap();
        w.write_record(["timestamp", "text"]).unwrap();
        for (ts, text) in rows {
            w.write_record([ts, text]).unwrap();
        }
        w.flush().unwrap();
    }
    println!("wrote {} assets to {}", ASSETS.len(), out.display());
}
