use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Overrides the cache root when set.
pub const CACHE_ENV: &str = "SENTIGAN_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = "cache";

/// Where a fetched CSV came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchSource {
    Cache,
    Network,
}

#[derive(Debug, Clone)]
pub struct Fetched {
    pub csv: String,
    pub path: PathBuf,
    pub source: FetchSource,
}

/// HTTP client for OHLCV CSV downloads with an on-disk cache.
///
/// The endpoint is a URL template with `{symbol}`, `{start}` and `{end}`
/// placeholders; dates are substituted as `YYYY-MM-DD`.
#[derive(Debug, Clone)]
pub struct FetchClient {
    endpoint: String,
    cache_dir: PathBuf,
}

impl FetchClient {
    /// Cache root taken from the environment, else `cache/`.
    pub fn new(endpoint: impl Into<String>) -> Self {
        let cache_dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
        Self::with_cache_dir(endpoint, cache_dir)
    }

    pub fn with_cache_dir(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            endpoint: endpoint.into(),
            cache_dir: cache_dir.into(),
        }
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn cache_path(&self, symbol: &str, start: NaiveDate, end: NaiveDate) -> PathBuf {
        self.cache_dir
            .join(symbol)
            .join(format!("{start}_{end}.csv"))
    }

    pub fn url(&self, symbol: &str, start: NaiveDate, end: NaiveDate) -> String {
        self.endpoint
            .replace("{symbol}", symbol)
            .replace("{start}", &start.to_string())
            .replace("{end}", &end.to_string())
    }

    /// Returns the cached CSV if present, otherwise downloads and caches it.
    pub fn fetch(&self, symbol: &str, start: NaiveDate, end: NaiveDate) -> Result<Fetched> {
        if start > end {
            return Err(Error::Usage(format!(
                "fetch range {start}..{end} is reversed"
            )));
        }
        let path = self.cache_path(symbol, start, end);
        if path.is_file() {
            return Ok(Fetched {
                csv: fs::read_to_string(&path)?,
                path,
                source: FetchSource::Cache,
            });
        }
        let url = self.url(symbol, start, end);
        log::info!("fetching {url}");
        let csv = ureq::get(&url)
            .call()
            .map_err(fetch_error)?
            .body_mut()
            .read_to_string()
            .map_err(fetch_error)?;
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("csv.part");
        fs::write(&tmp, &csv)?;
        fs::rename(&tmp, &path)?;
        Ok(Fetched {
            csv,
            path,
            source: FetchSource::Network,
        })
    }
}

fn fetch_error(err: ureq::Error) -> Error {
    match err {
        ureq::Error::StatusCode(status) => Error::Fetch {
            status: Some(status),
            message: format!("server responded with HTTP {status}"),
        },
        other => Error::Fetch {
            status: None,
            message: other.to_string(),
        },
    }
}
