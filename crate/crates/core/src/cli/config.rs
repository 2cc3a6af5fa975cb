use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::ModelSettings;

/// Where an asset's bars come from: a local CSV or a fetched date range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    pub symbol: String,
    pub data: Option<PathBuf>,
    /// Quoted `YYYY-MM-DD`, used with `[fetch]`.
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// `timestamp,text` CSV. A missing file leaves the sentiment at zero.
    pub tweets: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchConfig {
    /// URL template with `{symbol}`, `{start}` and `{end}`.
    pub endpoint: String,
}

/// A TOML run description. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub threads: usize,
    pub lexicon: Option<PathBuf>,
    pub fetch: Option<FetchConfig>,
    pub assets: Vec<AssetConfig>,
    #[serde(default)]
    pub models: ModelSettings,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output);
        if let Some(l) = self.lexicon.as_mut() {
            join(l);
        }
        for a in &mut self.assets {
            if let Some(d) = a.data.as_mut() {
                join(d);
            }
            if let Some(t) = a.tweets.as_mut() {
                join(t);
            }
        }
    }

    /// Checks everything that can be checked before work starts.
    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::Config(
                "no seed given; set `seed` in the config or pass --seed".into(),
            ));
        }
        if self.assets.is_empty() {
            return Err(Error::Config("no assets configured".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.assets {
            let ok = !a.symbol.is_empty()
                && a.symbol
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "._-^=".contains(c));
            if !ok {
                return Err(Error::Config(format!("invalid symbol `{}`", a.symbol)));
            }
            if !seen.insert(a.symbol.as_str()) {
                return Err(Error::Config(format!("asset {} listed twice", a.symbol)));
            }
            match (&a.data, a.start, a.end) {
                (Some(p), None, None) => {
                    if !p.is_file() {
                        return Err(Error::Config(format!(
                            "asset {}: data file {} does not exist",
                            a.symbol,
                            p.display()
                        )));
                    }
                }
                (None, Some(s), Some(e)) => {
                    if self.fetch.is_none() {
                        return Err(Error::Config(format!(
                            "asset {}: a date range needs a [fetch] endpoint",
                            a.symbol
                        )));
                    }
                    if s > e {
                        return Err(Error::Config(format!(
                            "asset {}: start {s} is after end {e}",
                            a.symbol
                        )));
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "asset {}: give either `data` or both `start` and `end`",
                        a.symbol
                    )))
                }
            }
        }
        if let Some(l) = &self.lexicon {
            if !l.is_file() {
                return Err(Error::Config(format!(
                    "lexicon {} does not exist",
                    l.display()
                )));
            }
        }
        self.models.validate()
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// Assets matching `filter`, in config order.
    pub fn select_assets(&self, filter: Option<&str>) -> Result<Vec<&AssetConfig>> {
        match filter {
            None => Ok(self.assets.iter().collect()),
            Some(sym) => self
                .assets
                .iter()
                .find(|a| a.symbol.eq_ignore_ascii_case(sym))
                .map(|a| vec![a])
                .ok_or_else(|| Error::Usage(format!("asset {sym} is not in the config"))),
        }
    }
}
