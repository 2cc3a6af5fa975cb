//! C ABI over the sentigan toolkit.
//!
//! Every function returns an [`SgStatus`]; on failure a description is
//! available from [`sg_last_error`] on the same thread. Handles are opaque
//! and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::OnceLock;

use sentigan::data::{align, load_ohlcv, repair_missing, AlignedDataset};
use sentigan::eval::{
    evaluate, train_model, ForecastReport, ModelArtifact, ModelKind, ModelSettings,
};
use sentigan::sentiment::{
    aggregate_daily, bundled_lexicon, clean_text, score_text, score_tweets, tokens_to_text, Lexicon,
};
use sentigan::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    DataError = 3,
    UsageError = 4,
    TrainingError = 5,
    IoError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgModelKind {
    Arima = 0,
    Lstm = 1,
    Gan = 2,
}

impl From<SgModelKind> for ModelKind {
    fn from(k: SgModelKind) -> Self {
        match k {
            SgModelKind::Arima => ModelKind::Arima,
            SgModelKind::Lstm => ModelKind::Lstm,
            SgModelKind::Gan => ModelKind::Gan,
        }
    }
}

/// Holdout error measures. `mape` is NaN when an actual value was zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgMetrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mape: f64,
}

/// An aligned market and sentiment dataset.
pub struct SgDataset(AlignedDataset);

/// A fitted model.
pub struct SgModel(ModelArtifact);

/// Held-out forecasts with their metrics.
pub struct SgReport(ForecastReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(err: &Error) -> SgStatus {
    match err {
        Error::Io(_) => SgStatus::IoError,
        _ => match err.exit_code() {
            2 => SgStatus::DataError,
            64 => SgStatus::UsageError,
            _ => SgStatus::TrainingError,
        },
    }
}

struct Fail(SgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> SgStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SgStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Fail(
            SgStatus::InvalidString,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn lexicon() -> &'static Lexicon {
    static LEX: OnceLock<Lexicon> = OnceLock::new();
    LEX.get_or_init(bundled_lexicon)
}

fn open(path: &str) -> Result<File, Fail> {
    File::open(path).map_err(|e| Fail(SgStatus::IoError, format!("{path}: {e}")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// VADER compound score of `utf8_text` with the bundled lexicon.
///
/// # Safety
/// `utf8_text` must be NUL-terminated; `compound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_sentiment_score(
    utf8_text: *const c_char,
    compound: *mut f64,
) -> SgStatus {
    guard(|| {
        let t = text(utf8_text, "text")?;
        *out(compound, "compound")? = score_text(lexicon(), &tokens_to_text(&clean_text(t)));
        Ok(())
    })
}

/// Loads an OHLCV CSV, repairs gaps and aligns daily sentiment scored from
/// an optional `timestamp,text` CSV (`tweets_path` may be null).
///
/// # Safety
/// String arguments must be NUL-terminated; `dataset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_load(
    symbol: *const c_char,
    ohlcv_path: *const c_char,
    tweets_path: *const c_char,
    dataset: *mut *mut SgDataset,
) -> SgStatus {
    guard(|| {
        let slot = out(dataset, "dataset")?;
        *slot = ptr::null_mut();
        let symbol = text(symbol, "symbol")?;
        let path = text(ohlcv_path, "ohlcv_path")?;
        let raw = load_ohlcv(open(path)?, symbol).map_err(|e| e.context(path))?;
        let (series, _) = repair_missing(&raw)?;
        let records = if tweets_path.is_null() {
            Vec::new()
        } else {
            let tp = text(tweets_path, "tweets_path")?;
            score_tweets(lexicon(), open(tp)?).map_err(|e| e.context(tp))?
        };
        let days = aggregate_daily(&records, &series.dates()).days;
        let (aligned, _) = align(&series, &days);
        aligned.validate()?;
        *slot = Box::into_raw(Box::new(SgDataset(aligned)));
        Ok(())
    })
}

/// Number of trading days in `dataset`.
///
/// # Safety
/// `dataset` must come from [`sg_dataset_load`]; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_len(dataset: *const SgDataset, len: *mut usize) -> SgStatus {
    guard(|| {
        *out(len, "len")? = handle(dataset, "dataset")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`sg_dataset_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_free(dataset: *mut SgDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits a model on the training partition of `dataset`. `settings_toml`
/// may be null for defaults.
///
/// # Safety
/// `dataset` must be a live handle; `model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_train(
    dataset: *const SgDataset,
    kind: SgModelKind,
    settings_toml: *const c_char,
    seed: u64,
    model: *mut *mut SgModel,
) -> SgStatus {
    guard(|| {
        let slot = out(model, "model")?;
        *slot = ptr::null_mut();
        let data = handle(dataset, "dataset")?;
        let settings = if settings_toml.is_null() {
            ModelSettings::default()
        } else {
            ModelSettings::from_toml(text(settings_toml, "settings_toml")?)?
        };
        let (artifact, _) = train_model(&data.0, kind.into(), &settings, seed)?;
        *slot = Box::into_raw(Box::new(SgModel(artifact)));
        Ok(())
    })
}

/// Writes `model` as JSON to `path`.
///
/// # Safety
/// `model` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_model_save(model: *const SgModel, path: *const c_char) -> SgStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let p = text(path, "path")?;
        std::fs::write(Path::new(p), m.0.to_json()?)
            .map_err(|e| Fail(SgStatus::IoError, format!("{p}: {e}")))
    })
}

/// Reads a model written by [`sg_model_save`] or the CLI.
///
/// # Safety
/// `path` must be NUL-terminated; `model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_load(path: *const c_char, model: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        let slot = out(model, "model")?;
        *slot = ptr::null_mut();
        let p = text(path, "path")?;
        let json =
            std::fs::read_to_string(p).map_err(|e| Fail(SgStatus::IoError, format!("{p}: {e}")))?;
        let artifact = ModelArtifact::from_json(&json)
            .map_err(|e| Fail(SgStatus::DataError, format!("{p}: {e}")))?;
        *slot = Box::into_raw(Box::new(SgModel(artifact)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(model: *mut SgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// One-step forecasts over the test partition the model was trained for.
///
/// # Safety
/// Handles must be live; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_evaluate(
    model: *const SgModel,
    dataset: *const SgDataset,
    report: *mut *mut SgReport,
) -> SgStatus {
    guard(|| {
        let slot = out(report, "report")?;
        *slot = ptr::null_mut();
        let m = handle(model, "model")?;
        let d = handle(dataset, "dataset")?;
        let r = evaluate(&m.0, &d.0, m.0.partition.policy)?;
        *slot = Box::into_raw(Box::new(SgReport(r)));
        Ok(())
    })
}

/// Number of forecast rows in `report`.
///
/// # Safety
/// `report` must be live; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_report_len(report: *const SgReport, len: *mut usize) -> SgStatus {
    guard(|| {
        *out(len, "len")? = handle(report, "report")?.0.rows.len();
        Ok(())
    })
}

/// # Safety
/// `report` must be live; `metrics` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_report_metrics(
    report: *const SgReport,
    metrics: *mut SgMetrics,
) -> SgStatus {
    guard(|| {
        let m = handle(report, "report")?.0.metrics;
        *out(metrics, "metrics")? = SgMetrics {
            mae: m.mae,
            mse: m.mse,
            rmse: m.rmse,
            mape: m.mape.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Copies predicted and actual closes into caller buffers of `capacity`
/// elements each; `capacity` must be at least [`sg_report_len`].
///
/// # Safety
/// Both buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_report_values(
    report: *const SgReport,
    predicted: *mut f64,
    actual: *mut f64,
    capacity: usize,
) -> SgStatus {
    guard(|| {
        let r = handle(report, "report")?;
        if predicted.is_null() || actual.is_null() {
            return Err(null("output buffer"));
        }
        let n = r.0.rows.len();
        if capacity < n {
            return Err(Fail(
                SgStatus::UsageError,
                format!("buffer holds {capacity} values, report has {n}"),
            ));
        }
        let p = std::slice::from_raw_parts_mut(predicted, n);
        let a = std::slice::from_raw_parts_mut(actual, n);
        for (i, row) in r.0.rows.iter().enumerate() {
            p[i] = row.predicted;
            a[i] = row.actual;
        }
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sg_report_free(report: *mut SgReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
