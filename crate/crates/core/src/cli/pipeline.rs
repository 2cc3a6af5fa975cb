use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;

use super::config::{AssetConfig, RunConfig};
use super::plot::render_svg;
use crate::data::{
    align, load_ohlcv, repair_missing, write_repair_log, AlignedDataset, FetchClient, Series,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_rows, evaluate, render_metric_grid, train_model, write_metric_rows, AggregateReport,
    ForecastReport, MetricRow, ModelArtifact, ModelKind,
};
use crate::sentiment::{
    aggregate_daily, bundled_lexicon, load_lexicon, score_tweets, DailySentiment, Lexicon,
    SentimentRecord,
};

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn aligned(&self, sym: &str) -> PathBuf {
        self.root.join("data").join(format!("{sym}.aligned.json"))
    }

    pub fn repairs(&self, sym: &str) -> PathBuf {
        self.root.join("data").join(format!("{sym}.repairs.jsonl"))
    }

    pub fn daily_sentiment(&self, sym: &str) -> PathBuf {
        self.root.join("sentiment").join(format!("{sym}.daily.csv"))
    }

    pub fn scores(&self, sym: &str) -> PathBuf {
        self.root
            .join("sentiment")
            .join(format!("{sym}.scores.csv"))
    }

    pub fn artifact(&self, sym: &str, m: ModelKind) -> PathBuf {
        self.root.join("artifacts").join(format!("{sym}.{m}.json"))
    }

    pub fn training_log(&self, sym: &str, m: ModelKind) -> PathBuf {
        self.root.join("logs").join(format!("{sym}.{m}.csv"))
    }

    pub fn report(&self, sym: &str, m: ModelKind) -> PathBuf {
        self.root.join("reports").join(format!("{sym}.{m}.json"))
    }

    pub fn plot_svg(&self, sym: &str, m: ModelKind) -> PathBuf {
        self.root.join("plots").join(format!("{sym}.{m}.svg"))
    }

    pub fn plot_csv(&self, sym: &str, m: ModelKind) -> PathBuf {
        self.root.join("plots").join(format!("{sym}.{m}.csv"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn aggregate(&self) -> PathBuf {
        self.root.join("aggregate.csv")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.txt")
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::Io(e).context(dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::Io(e).context(tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::Io(e).context(path.display()))?;
    Ok(())
}

fn write_with<F: FnOnce(&mut Vec<u8>) -> Result<()>>(path: &Path, f: F) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

fn read_text(path: &Path, missing: impl FnOnce() -> String) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::Data(missing())),
        Err(e) => Err(Error::Io(e).context(path.display())),
    }
}

/// Seed for one (asset, model) job. Depends only on the run seed and the
/// job's names, so filtering assets does not change any result.
pub fn job_seed(seed: u64, symbol: &str, model: ModelKind) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in symbol.bytes().chain(*b"/").chain(model.name().bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The context handed to every command.
pub struct Pipeline<'a> {
    pub config: &'a RunConfig,
    pub layout: Layout,
    pub assets: Vec<&'a AssetConfig>,
    pub models: Vec<ModelKind>,
    pool: rayon::ThreadPool,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a RunConfig, asset: Option<&str>, models: Vec<ModelKind>) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            config,
            layout: Layout::new(&config.output),
            assets: config.select_assets(asset)?,
            models,
            pool,
        })
    }

    fn lexicon(&self) -> Result<Lexicon> {
        let Some(path) = &self.config.lexicon else {
            return Ok(bundled_lexicon());
        };
        let file = fs::File::open(path).map_err(|e| Error::Io(e).context(path.display()))?;
        let load =
            load_lexicon(std::io::BufReader::new(file)).map_err(|e| e.context(path.display()))?;
        if !load.malformed_lines.is_empty() {
            log::warn!(
                "{}: skipped {} malformed lines (first at line {})",
                path.display(),
                load.malformed_lines.len(),
                load.malformed_lines[0]
            );
        }
        Ok(load.lexicon)
    }

    fn load_series(&self, asset: &AssetConfig) -> Result<(Series, Vec<crate::data::RepairEntry>)> {
        let (text, origin) = match (&asset.data, asset.start, asset.end) {
            (Some(path), _, _) => (
                fs::read_to_string(path).map_err(|e| Error::Io(e).context(path.display()))?,
                path.display().to_string(),
            ),
            (None, Some(start), Some(end)) => {
                let endpoint = &self.config.fetch.as_ref().expect("validated").endpoint;
                let f = FetchClient::new(endpoint.clone())
                    .fetch(&asset.symbol, start, end)
                    .map_err(|e| e.context(&asset.symbol))?;
                let origin = f.path.display().to_string();
                (f.csv, origin)
            }
            _ => unreachable!("validated asset source"),
        };
        let raw = load_ohlcv(text.as_bytes(), &asset.symbol).map_err(|e| e.context(&origin))?;
        if raw.duplicates_dropped > 0 {
            log::warn!(
                "{}: dropped {} duplicate dates",
                asset.symbol,
                raw.duplicates_dropped
            );
        }
        repair_missing(&raw).map_err(|e| e.context(&origin))
    }

    fn score(&self, asset: &AssetConfig, lexicon: &Lexicon) -> Result<Vec<SentimentRecord>> {
        let Some(path) = &asset.tweets else {
            log::info!(
                "{}: no tweets configured; sentiment is neutral",
                asset.symbol
            );
            return Ok(Vec::new());
        };
        if !path.is_file() {
            log::warn!(
                "{}: tweet file {} not found; sentiment set to zero",
                asset.symbol,
                path.display()
            );
            return Ok(Vec::new());
        }
        let file = fs::File::open(path).map_err(|e| Error::Io(e).context(path.display()))?;
        score_tweets(lexicon, file).map_err(|e| e.context(path.display()))
    }

    fn daily(
        &self,
        asset: &AssetConfig,
        records: &[SentimentRecord],
        dates: &[NaiveDate],
    ) -> Vec<DailySentiment> {
        let agg = aggregate_daily(records, dates);
        if agg.unassigned > 0 {
            log::warn!(
                "{}: {} tweets fall after the last trading day and were ignored",
                asset.symbol,
                agg.unassigned
            );
        }
        agg.days
    }

    fn write_daily(&self, sym: &str, days: &[DailySentiment]) -> Result<()> {
        write_with(&self.layout.daily_sentiment(sym), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["date", "compound", "count"])?;
            for d in days {
                w.write_record([
                    d.date.to_string(),
                    d.compound.to_string(),
                    d.sample_count.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })
    }

    /// Scores each asset's tweets and writes per-text and per-day tables.
    pub fn sentiment(&self) -> Result<()> {
        let lexicon = self.lexicon()?;
        self.for_assets(|asset| {
            let (series, _) = self.load_series(asset)?;
            let records = self.score(asset, &lexicon)?;
            let days = self.daily(asset, &records, &series.dates());
            write_with(&self.layout.scores(&asset.symbol), |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["timestamp", "compound", "text"])?;
                for r in &records {
                    w.write_record([
                        r.timestamp.to_string(),
                        r.compound.to_string(),
                        r.raw_text.clone(),
                    ])?;
                }
                w.flush()?;
                Ok(())
            })?;
            self.write_daily(&asset.symbol, &days)?;
            log::info!(
                "{}: scored {} texts over {} trading days",
                asset.symbol,
                records.len(),
                days.len()
            );
            Ok(())
        })
    }

    /// Loads, repairs and aligns each asset and writes the datasets.
    pub fn ingest(&self) -> Result<()> {
        let lexicon = self.lexicon()?;
        self.for_assets(|asset| {
            let (series, repairs) = self.load_series(asset)?;
            let records = self.score(asset, &lexicon)?;
            let days = self.daily(asset, &records, &series.dates());
            let (aligned, _) = align(&series, &days);
            aligned.validate().map_err(|e| e.context(&asset.symbol))?;
            write_atomic(
                &self.layout.aligned(&asset.symbol),
                (serde_json::to_string(&aligned)? + "\n").as_bytes(),
            )?;
            write_with(&self.layout.repairs(&asset.symbol), |buf| {
                write_repair_log(&repairs, buf)
            })?;
            self.write_daily(&asset.symbol, &days)?;
            if !repairs.is_empty() {
                log::warn!("{}: {} repairs applied", asset.symbol, repairs.len());
            }
            log::info!("{}: {} aligned trading days", asset.symbol, aligned.len());
            Ok(())
        })
    }

    fn load_aligned(&self, sym: &str) -> Result<AlignedDataset> {
        let path = self.layout.aligned(sym);
        let text = read_text(&path, || {
            format!("{sym}: no dataset at {}; run ingest first", path.display())
        })?;
        let aligned: AlignedDataset = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        aligned.validate().map_err(|e| e.context(path.display()))?;
        Ok(aligned)
    }

    fn load_artifact(&self, sym: &str, m: ModelKind) -> Result<ModelArtifact> {
        let path = self.layout.artifact(sym, m);
        let text = read_text(&path, || {
            format!("missing {m} artifact for {sym} ({})", path.display())
        })?;
        ModelArtifact::from_json(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    fn load_report(&self, sym: &str, m: ModelKind) -> Result<ForecastReport> {
        let path = self.layout.report(sym, m);
        let text = read_text(&path, || {
            format!("missing {m} report for {sym} ({})", path.display())
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    fn cells(&self) -> Vec<(&'a AssetConfig, ModelKind)> {
        self.assets
            .iter()
            .flat_map(|a| self.models.iter().map(move |m| (*a, *m)))
            .collect()
    }

    fn for_assets<F: Fn(&AssetConfig) -> Result<()> + Sync>(&self, f: F) -> Result<()> {
        let results: Vec<Result<()>> = self
            .pool
            .install(|| self.assets.par_iter().map(|a| f(a)).collect());
        results.into_iter().collect()
    }

    fn for_cells<T: Send, F: Fn(&AssetConfig, ModelKind) -> Result<T> + Sync>(
        &self,
        f: F,
    ) -> Result<Vec<T>> {
        let cells = self.cells();
        let results: Vec<Result<T>> = self
            .pool
            .install(|| cells.par_iter().map(|(a, m)| f(a, *m)).collect());
        results.into_iter().collect()
    }

    /// Fits every selected model on every selected asset.
    pub fn train(&self) -> Result<()> {
        let settings = &self.config.models;
        let seed = self.config.seed();
        self.for_cells(|asset, m| {
            let sym = &asset.symbol;
            let aligned = self.load_aligned(sym)?;
            let (artifact, log) = train_model(&aligned, m, settings, job_seed(seed, sym, m))
                .map_err(|e| e.context(format!("{sym} {m}")))?;
            write_atomic(
                &self.layout.artifact(sym, m),
                artifact.to_json()?.as_bytes(),
            )?;
            write_with(&self.layout.training_log(sym, m), |buf| log.write_csv(buf))?;
            log::info!("{sym}: trained {m}");
            Ok(())
        })?;
        Ok(())
    }

    /// Evaluates every artifact, audits the reports and writes the tables.
    pub fn evaluate(&self) -> Result<String> {
        let splits = self.config.models.splits;
        self.for_cells(|asset, m| {
            let sym = &asset.symbol;
            let artifact = self.load_artifact(sym, m)?;
            let aligned = self.load_aligned(sym)?;
            let report = evaluate(&artifact, &aligned, splits.policy(m))
                .map_err(|e| e.context(format!("{sym} {m}")))?;
            write_atomic(&self.layout.report(sym, m), report.to_json()?.as_bytes())
        })?;
        self.audit()?;
        let reports = self
            .cells()
            .into_iter()
            .map(|(a, m)| self.load_report(&a.symbol, m))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<MetricRow> = reports.iter().map(MetricRow::from).collect();
        write_with(&self.layout.metrics(), |buf| write_metric_rows(&rows, buf))?;
        let mut summary = format!("Per-asset holdout metrics\n\n{}", render_metric_grid(&rows));
        if self.models.len() == ModelKind::ALL.len() {
            let agg = aggregate_rows(&rows)?;
            write_with(&self.layout.aggregate(), |buf| agg.write_csv(buf))?;
            summary += &format!(
                "\nAggregate over {} assets\n\n{}",
                agg.assets,
                summary_table(&agg)
            );
        } else {
            log::info!("aggregate skipped: not every model was evaluated");
        }
        write_atomic(&self.layout.summary(), summary.as_bytes())?;
        Ok(summary)
    }

    /// Checks every emitted report against its dataset: each prediction
    /// targets a test-partition day and used data up to the previous
    /// trading day only.
    pub fn audit(&self) -> Result<()> {
        for (asset, m) in self.cells() {
            let sym = &asset.symbol;
            let report = self.load_report(sym, m)?;
            let aligned = self.load_aligned(sym)?;
            let artifact = self.load_artifact(sym, m)?;
            audit_report(&report, &aligned, artifact.partition.first_test_target)?;
        }
        Ok(())
    }

    /// Writes an SVG chart and a CSV for each selected report.
    pub fn plot(&self) -> Result<()> {
        for (asset, m) in self.cells() {
            let report = self.load_report(&asset.symbol, m)?;
            write_atomic(
                &self.layout.plot_svg(&asset.symbol, m),
                render_svg(&report).as_bytes(),
            )?;
            write_with(&self.layout.plot_csv(&asset.symbol, m), |buf| {
                report.write_plot_csv(buf)
            })?;
        }
        Ok(())
    }

    pub fn run(&self) -> Result<String> {
        self.ingest()?;
        self.train()?;
        let summary = self.evaluate()?;
        self.plot()?;
        Ok(summary)
    }
}

/// Aggregate table plus one line per RMSE tie.
pub fn summary_table(agg: &AggregateReport) -> String {
    let mut out = agg.render();
    for t in &agg.ties {
        let names: Vec<&str> = t.models.iter().map(|m| m.name()).collect();
        out += &format!(
            "tie on {}: {} at RMSE {}\n",
            t.asset,
            names.join(", "),
            t.rmse
        );
    }
    out
}

/// Causality and provenance audit of one report.
pub fn audit_report(
    report: &ForecastReport,
    aligned: &AlignedDataset,
    first_test: NaiveDate,
) -> Result<()> {
    report.audit_causality()?;
    let closes = aligned.closes();
    for r in &report.rows {
        let fail = |why: &str| {
            Err(Error::Data(format!(
                "{} {} on {}: {why}",
                report.symbol, report.model, r.date
            )))
        };
        let Ok(i) = aligned.dates.binary_search(&r.date) else {
            return fail("target is not a trading day of the dataset");
        };
        if r.date < first_test {
            return fail("target lies in the training partition");
        }
        if i == 0 || aligned.dates[i - 1] != r.context_end {
            return fail("prediction used data beyond the previous trading day");
        }
        if closes[i] != r.actual {
            return fail("actual close differs from the dataset");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitPolicy;
    use crate::eval::ForecastRow;
    use crate::synth;

    #[test]
    fn job_seeds_differ_by_cell() {
        let a = job_seed(1, "AAA", ModelKind::Gan);
        assert_eq!(a, job_seed(1, "AAA", ModelKind::Gan));
        assert_ne!(a, job_seed(1, "AAA", ModelKind::Lstm));
        assert_ne!(a, job_seed(1, "AAB", ModelKind::Gan));
        assert_ne!(a, job_seed(2, "AAA", ModelKind::Gan));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/y.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn audit_catches_lookahead_and_leakage() {
        let a = synth::sentiment_jump_asset(1, 40, 100.0, 0.9, 1.0, 3.0);
        let closes = a.closes();
        let row = |i: usize, ctx: usize| ForecastRow {
            date: a.dates[i],
            context_end: a.dates[ctx],
            predicted: 1.0,
            actual: closes[i],
        };
        let make = |rows| {
            ForecastReport::new("SYN", ModelKind::Gan, SplitPolicy::HoldoutLast20, rows).unwrap()
        };
        let first = a.dates[30];
        audit_report(&make(vec![row(30, 29), row(31, 30)]), &a, first).unwrap();
        assert!(audit_report(&make(vec![row(29, 28)]), &a, first).is_err());
        assert!(audit_report(&make(vec![row(32, 30)]), &a, first).is_err());
        let mut wrong = row(33, 32);
        wrong.actual += 1.0;
        assert!(audit_report(&make(vec![wrong]), &a, first).is_err());
    }
}
