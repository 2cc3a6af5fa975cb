use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::report::{ForecastReport, ForecastRow, ModelKind};
use crate::arima::{self, AdfResult, ArimaModel, ArimaOrder};
use crate::data::{
    make_windows, split, AlignedDataset, SentimentMode, SplitPolicy, SplitSpec, WindowSample,
    CLOSE, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::gan::{self, Discriminator, GanConfig, Generator, LossLog};
use crate::lstm::{self, LstmConfig, LstmModel, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaSettings {
    pub p_max: usize,
    pub q_max: usize,
    /// Re-estimate the coefficients (same order) before every test step.
    pub refit: bool,
}

impl Default for ArimaSettings {
    fn default() -> Self {
        Self {
            p_max: arima::DEFAULT_P_MAX,
            q_max: arima::DEFAULT_Q_MAX,
            refit: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub arima: SplitPolicy,
    pub lstm: SplitPolicy,
    pub gan: SplitPolicy,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            arima: ModelKind::Arima.default_split(),
            lstm: ModelKind::Lstm.default_split(),
            gan: ModelKind::Gan.default_split(),
        }
    }
}

impl SplitSettings {
    pub fn policy(&self, model: ModelKind) -> SplitPolicy {
        match model {
            ModelKind::Arima => self.arima,
            ModelKind::Lstm => self.lstm,
            ModelKind::Gan => self.gan,
        }
    }
}

/// Everything that shapes training and evaluation for one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub window: usize,
    pub sentiment_mode: SentimentMode,
    pub splits: SplitSettings,
    pub arima: ArimaSettings,
    pub lstm: LstmConfig,
    pub gan: GanConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            sentiment_mode: SentimentMode::default(),
            splits: SplitSettings::default(),
            arima: ArimaSettings::default(),
            lstm: LstmConfig::default(),
            gan: GanConfig::default(),
        }
    }
}

impl ModelSettings {
    /// Parses a TOML table; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        self.lstm.schedule.validate()?;
        self.gan.validate()
    }
}

/// The training partition an artifact was fitted on. Windows are split by
/// target date; `boundary` indexes the first test window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub policy: SplitPolicy,
    pub window: usize,
    pub sentiment_mode: SentimentMode,
    pub windows: usize,
    pub boundary: usize,
    pub last_train_target: NaiveDate,
    pub first_test_target: NaiveDate,
}

impl Partition {
    fn of(windows: &[WindowSample], spec: SplitSpec, window: usize, mode: SentimentMode) -> Self {
        Self {
            policy: spec.policy,
            window,
            sentiment_mode: mode,
            windows: spec.total,
            boundary: spec.boundary,
            last_train_target: windows[spec.boundary - 1].target_date,
            first_test_target: windows[spec.boundary].target_date,
        }
    }

    /// Row index (in the aligned dataset) of the first test target.
    pub fn first_test_row(&self) -> usize {
        self.window + self.boundary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelBody {
    Arima {
        model: ArimaModel,
        refit: bool,
        adf: AdfResult,
    },
    Lstm {
        model: LstmModel,
    },
    Gan {
        generator: Generator,
        discriminator: Discriminator,
        autoregressive: bool,
    },
}

/// A fitted model with the partition it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub symbol: String,
    pub model: ModelKind,
    pub seed: u64,
    pub partition: Partition,
    pub body: ModelBody,
}

impl ModelArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Per-model training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainLog {
    Arima {
        order: ArimaOrder,
        aic: f64,
        adf: AdfResult,
    },
    Lstm(TrainingLog),
    Gan(LossLog),
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        match self {
            TrainLog::Lstm(log) => log.write_csv(sink),
            TrainLog::Gan(log) => log.write_csv(sink),
            TrainLog::Arima { order, aic, adf } => {
                let mut w = csv::Writer::from_writer(sink);
                w.write_record(["p", "d", "q", "aic", "adf_statistic", "adf_lag"])?;
                w.write_record([
                    order.p.to_string(),
                    order.d.to_string(),
                    order.q.to_string(),
                    aic.to_string(),
                    adf.statistic.to_string(),
                    adf.lag.to_string(),
                ])?;
                w.flush()?;
                Ok(())
            }
        }
    }
}

fn windows_and_split(
    aligned: &AlignedDataset,
    settings_window: usize,
    mode: SentimentMode,
    policy: SplitPolicy,
) -> Result<(Vec<WindowSample>, SplitSpec)> {
    aligned.validate()?;
    let windows = make_windows(aligned, settings_window, mode)?;
    let spec = split(&windows, policy)?.2;
    Ok((windows, spec))
}

/// Fits `model` on the training partition of `aligned`.
pub fn train_model(
    aligned: &AlignedDataset,
    model: ModelKind,
    settings: &ModelSettings,
    seed: u64,
) -> Result<(ModelArtifact, TrainLog)> {
    settings.validate()?;
    let policy = settings.splits.policy(model);
    let (windows, spec) =
        windows_and_split(aligned, settings.window, settings.sentiment_mode, policy)?;
    let partition = Partition::of(&windows, spec, settings.window, settings.sentiment_mode);
    let train = &windows[..spec.boundary];
    let (body, log) = match model {
        ModelKind::Arima => {
            let closes = aligned.closes();
            let history = &closes[..partition.first_test_row()];
            let (_, adf) = arima::select_d(history)?;
            let (order, fitted) =
                arima::select_order(history, settings.arima.p_max, settings.arima.q_max)?;
            let log = TrainLog::Arima {
                order,
                aic: fitted.aic(),
                adf,
            };
            (
                ModelBody::Arima {
                    model: fitted,
                    refit: settings.arima.refit,
                    adf,
                },
                log,
            )
        }
        ModelKind::Lstm => {
            let (fitted, log) = lstm::train(train, &settings.lstm, seed)?;
            (ModelBody::Lstm { model: fitted }, TrainLog::Lstm(log))
        }
        ModelKind::Gan => {
            let (generator, discriminator, log) = gan::train(train, &settings.gan, seed)?;
            (
                ModelBody::Gan {
                    generator,
                    discriminator,
                    autoregressive: settings.gan.autoregressive,
                },
                TrainLog::Gan(log),
            )
        }
    };
    Ok((
        ModelArtifact {
            symbol: aligned.symbol.clone(),
            model,
            seed,
            partition,
            body,
        },
        log,
    ))
}

/// One-step forecasts over the test partition of `aligned` under `policy`,
/// which must reproduce the partition the artifact was trained on.
pub fn evaluate(
    artifact: &ModelArtifact,
    aligned: &AlignedDataset,
    policy: SplitPolicy,
) -> Result<ForecastReport> {
    let p = artifact.partition;
    if policy != p.policy {
        return Err(Error::Data(format!(
            "{} {}: trained with split {} but evaluated with {}",
            artifact.symbol,
            artifact.model,
            p.policy.name(),
            policy.name()
        )));
    }
    if aligned.symbol != artifact.symbol {
        return Err(Error::Data(format!(
            "artifact for {} evaluated on {}",
            artifact.symbol, aligned.symbol
        )));
    }
    let (windows, spec) = windows_and_split(aligned, p.window, p.sentiment_mode, policy)?;
    let now = Partition::of(&windows, spec, p.window, p.sentiment_mode);
    if now != p {
        return Err(Error::Data(format!(
            "{} {}: partition mismatch (trained on {} windows, train ending {}; data gives {} windows, train ending {})",
            artifact.symbol, artifact.model, p.windows, p.last_train_target, now.windows, now.last_train_target
        )));
    }
    let test = &windows[spec.boundary..];
    let rows = match &artifact.body {
        ModelBody::Arima { model, refit, .. } => {
            arima_rows(model, *refit, aligned, p.first_test_row())?
        }
        ModelBody::Lstm { model } => test
            .iter()
            .map(|w| {
                Ok(ForecastRow {
                    date: w.target_date,
                    context_end: w.context_end,
                    predicted: model.predict(w)?,
                    actual: w.target[CLOSE],
                })
            })
            .collect::<Result<_>>()?,
        ModelBody::Gan {
            generator,
            autoregressive,
            ..
        } => {
            let f = gan::forecast_windows(generator, test, *autoregressive)?;
            if f.clipped_inputs > 0 {
                log::warn!(
                    "{}: {} scaled GAN inputs outside [-1, 1] were clipped",
                    artifact.symbol,
                    f.clipped_inputs
                );
            }
            f.rows
        }
    };
    ForecastReport::new(artifact.symbol.clone(), artifact.model, policy, rows)
}

fn arima_rows(
    model: &ArimaModel,
    refit: bool,
    aligned: &AlignedDataset,
    first: usize,
) -> Result<Vec<ForecastRow>> {
    let closes = aligned.closes();
    let predicted = if refit {
        (first..closes.len())
            .map(|i| arima::fit(&closes[..i], model.order)?.forecast_one_step(&closes[..i]))
            .collect::<Result<Vec<f64>>>()?
    } else {
        model.rolling_forecast(&closes[first..])?
    };
    Ok(predicted
        .into_iter()
        .enumerate()
        .map(|(k, y)| ForecastRow {
            date: aligned.dates[first + k],
            context_end: aligned.dates[first + k - 1],
            predicted: y,
            actual: closes[first + k],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::GanSchedule;
    use crate::lstm::TrainSchedule;
    use crate::synth;

    fn quick_settings() -> ModelSettings {
        ModelSettings {
            window: 5,
            arima: ArimaSettings {
                p_max: 1,
                q_max: 1,
                refit: false,
            },
            lstm: LstmConfig {
                hidden_size: 4,
                schedule: TrainSchedule {
                    max_epochs: 3,
                    ..TrainSchedule::default()
                },
                ..LstmConfig::default()
            },
            gan: GanConfig {
                generator_hidden: vec![8],
                discriminator_hidden: vec![8],
                schedule: GanSchedule {
                    epochs: 2,
                    ..GanSchedule::default()
                },
                ..GanConfig::default()
            },
            ..ModelSettings::default()
        }
    }

    fn asset() -> AlignedDataset {
        synth::sentiment_jump_asset(4, 125, 100.0, 0.9, 1.0, 3.0)
    }

    #[test]
    fn row_counts_follow_split() {
        let a = asset();
        let s = quick_settings();
        let n = a.len() - s.window;
        for (m, expect) in [
            (ModelKind::Arima, n - n * 9 / 10),
            (ModelKind::Lstm, n - n * 7 / 10),
            (ModelKind::Gan, 20),
        ] {
            let (art, _) = train_model(&a, m, &s, 1).unwrap();
            let r = evaluate(&art, &a, s.splits.policy(m)).unwrap();
            assert_eq!(r.rows.len(), expect, "{m}");
            assert_eq!(r.rows.last().unwrap().date, *a.dates.last().unwrap());
            assert!(r
                .rows
                .iter()
                .all(|row| row.date >= art.partition.first_test_target));
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let a = asset();
        let s = quick_settings();
        for m in ModelKind::ALL {
            let (x, _) = train_model(&a, m, &s, 3).unwrap();
            let (y, _) = train_model(&a, m, &s, 3).unwrap();
            assert_eq!(x.to_json().unwrap(), y.to_json().unwrap());
            let rx = evaluate(&x, &a, s.splits.policy(m))
                .unwrap()
                .to_json()
                .unwrap();
            let ry = evaluate(
                &ModelArtifact::from_json(&y.to_json().unwrap()).unwrap(),
                &a,
                s.splits.policy(m),
            )
            .unwrap()
            .to_json()
            .unwrap();
            assert_eq!(rx, ry);
        }
    }

    #[test]
    fn partition_guards() {
        let a = asset();
        let s = quick_settings();
        let (art, _) = train_model(&a, ModelKind::Lstm, &s, 1).unwrap();
        assert!(evaluate(&art, &a, SplitPolicy::Fraction90_10).is_err());
        assert!(evaluate(&art, &a.slice(0, a.len() - 1), SplitPolicy::Fraction70_30).is_err());
        let mut shuffled = a.clone();
        shuffled.dates.swap(10, 11);
        assert!(evaluate(&art, &shuffled, SplitPolicy::Fraction70_30).is_err());
    }

    #[test]
    fn test_rows_do_not_influence_training() {
        let a = asset();
        let s = quick_settings();
        for m in ModelKind::ALL {
            let (art, _) = train_model(&a, m, &s, 5).unwrap();
            let mut b = a.clone();
            for i in art.partition.first_test_row()..b.len() {
                for f in 0..6 {
                    b.features.set(i, f, b.features.get(i, f) * 3.0 + 7.0);
                }
                b.sentiment[i] = -b.sentiment[i];
            }
            let (art_b, _) = train_model(&b, m, &s, 5).unwrap();
            assert_eq!(art, art_b, "{m}");
        }
    }

    #[test]
    fn arima_refit_mode() {
        let a = asset();
        let mut s = quick_settings();
        s.arima.refit = true;
        let (art, _) = train_model(&a, ModelKind::Arima, &s, 1).unwrap();
        let r = evaluate(&art, &a, SplitPolicy::Fraction90_10).unwrap();
        assert_eq!(r.rows.len(), (a.len() - 5) - (a.len() - 5) * 9 / 10);
    }

    #[test]
    fn settings_parse_with_defaults() {
        let s: ModelSettings = toml::from_str(
            "window = 10\n[gan.schedule]\nepochs = 5\n[splits]\ngan = \"fraction_70_30\"\n",
        )
        .unwrap();
        assert_eq!(s.window, 10);
        assert_eq!(s.gan.schedule.epochs, 5);
        assert_eq!(s.gan.schedule.batch_size, 5);
        assert_eq!(s.splits.gan, SplitPolicy::Fraction70_30);
        assert_eq!(s.splits.arima, SplitPolicy::Fraction90_10);
        assert!(matches!(
            ModelSettings::from_toml("windw = 3"),
            Err(Error::Config(_))
        ));
        assert!(ModelSettings::from_toml("window = 0").is_err());
    }
}
