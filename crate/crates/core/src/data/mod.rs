//! Market data ingestion, repair, sentiment alignment, windowing and
//! chronological partitioning.

pub mod align;
pub mod bar;
pub mod fetch;
pub mod repair;
pub mod split;
pub mod window;

pub use align::{align, ensure_chronological, AlignDiagnostics, AlignedDataset};
pub use bar::{
    load_ohlcv, write_ohlcv, Bar, RawBar, RawSeries, Series, CLOSE, FEATURES, FEATURE_NAMES,
};
pub use fetch::{FetchClient, FetchSource, Fetched, CACHE_ENV};
pub use repair::{repair_missing, write_repair_log, RepairAction, RepairEntry};
pub use split::{split, SplitPolicy, SplitSpec, HOLDOUT_LEN};
pub use window::{fit_window_scaler, make_windows, SentimentMode, WindowSample, DEFAULT_WINDOW};
