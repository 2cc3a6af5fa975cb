//! The `sentigan` command line: ingest, score, train, evaluate and plot.

mod config;
mod pipeline;
mod plot;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{AssetConfig, FetchConfig, RunConfig};
pub use pipeline::{audit_report, job_seed, summary_table, write_atomic, Layout, Pipeline};
pub use plot::render_svg;

use crate::error::{Error, Result};
use crate::eval::{aggregate_rows, read_metric_rows, ModelKind};

#[derive(Debug, Parser)]
#[command(
    name = "sentigan",
    version,
    about = "Sentiment-conditioned stock forecasting"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restricts the command to one asset symbol.
    #[arg(long, global = true)]
    pub asset: Option<String>,
    /// arima, lstm, gan or all.
    #[arg(long, global = true, default_value = "all", value_parser = parse_models)]
    pub model: ModelSelection,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSelection(pub Vec<ModelKind>);

fn parse_models(s: &str) -> std::result::Result<ModelSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ModelSelection(ModelKind::ALL.to_vec()));
    }
    s.parse::<ModelKind>()
        .map(|m| ModelSelection(vec![m]))
        .map_err(|_| format!("unknown model `{s}` (expected arima, lstm, gan or all)"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, repair and align market data with daily sentiment.
    Ingest,
    /// Score tweets and write per-text and per-day sentiment.
    Sentiment,
    /// Fit models and write artifacts and training logs.
    Train,
    /// Forecast held-out data, audit and aggregate.
    Evaluate {
        /// Aggregate an existing `asset,model,rmse,...` table instead.
        #[arg(long)]
        from_metrics: Option<PathBuf>,
    },
    /// Chart predicted against actual closes.
    Plot,
    /// ingest, train, evaluate and plot in one go.
    Run,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn from_metrics(path: &PathBuf, cli: &Cli) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| Error::Io(e).context(path.display()))?;
    let rows = read_metric_rows(file).map_err(|e| e.context(path.display()))?;
    let agg = aggregate_rows(&rows)?;
    let mut csv = Vec::new();
    agg.write_csv(&mut csv)?;
    if cli.config.is_some() {
        let cfg = load_config(cli)?;
        write_atomic(&Layout::new(&cfg.output).aggregate(), &csv)?;
    }
    print!("{}", summary_table(&agg));
    println!();
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    if let Command::Evaluate {
        from_metrics: Some(path),
    } = &cli.command
    {
        return from_metrics(path, cli);
    }
    let cfg = load_config(cli)?;
    let p = Pipeline::new(&cfg, cli.asset.as_deref(), cli.model.0.clone())?;
    match cli.command {
        Command::Ingest => p.ingest(),
        Command::Sentiment => p.sentiment(),
        Command::Train => p.train(),
        Command::Evaluate { .. } => p.evaluate().map(|s| print!("{s}")),
        Command::Plot => p.plot(),
        Command::Run => p.run().map(|s| print!("{s}")),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
