//! Forecast metrics, per-asset evaluation and cross-asset aggregation.

mod aggregate;
mod artifact;
mod metrics;
mod report;

pub use aggregate::{
    aggregate, aggregate_rows, median, read_metric_rows, render_metric_grid, write_metric_rows,
    AggregateReport, MetricRow, ModelSummary, Tie,
};
pub use artifact::{
    evaluate, train_model, ArimaSettings, ModelArtifact, ModelBody, ModelSettings, Partition,
    SplitSettings, TrainLog,
};
pub use metrics::{metrics, Metrics};
pub use report::{ForecastReport, ForecastRow, ModelKind};
