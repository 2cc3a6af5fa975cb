use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cell::LstmModel;
use crate::data::{fit_window_scaler, WindowSample, FEATURES};
use crate::error::{Error, Result};
use crate::numkernel::{AdamState, Matrix, ScaleMode};
use crate::synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub validation_fraction: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            plateau_factor: 0.5,
            plateau_patience: 5,
            validation_fraction: 0.15,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lstm schedule: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 || self.plateau_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau_factor must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden_size: usize,
    pub residual: bool,
    pub schedule: TrainSchedule,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            residual: true,
            schedule: TrainSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epochs after which the learning rate was reduced.
    pub plateau_epochs: Vec<usize>,
    /// Epoch whose weights were returned.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// CSV `epoch,train_loss,val_loss,lr`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["epoch", "train_loss", "val_loss", "lr"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.lr.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Prepared {
    seq: Matrix,
    target: f64,
}

fn mean_loss(model: &LstmModel, data: &[Prepared]) -> Result<f64> {
    let mut total = 0.0;
    for d in data {
        total += (model.forward_sequence(&d.seq)?.0 - d.target).powi(2);
    }
    Ok(total / data.len() as f64)
}

/// Trains on `samples` (chronological). The last `validation_fraction` of
/// them drive early stopping and the plateau schedule; the weights with the
/// lowest validation loss are returned.
pub fn train(
    samples: &[WindowSample],
    config: &LstmConfig,
    seed: u64,
) -> Result<(LstmModel, TrainingLog)> {
    let sched = &config.schedule;
    sched.validate()?;
    if config.hidden_size == 0 {
        return Err(Error::Config("lstm hidden_size must be at least 1".into()));
    }
    if samples.len() < 2 * sched.batch_size {
        return Err(Error::Insufficient(format!(
            "LSTM training needs at least {} samples, got {}",
            2 * sched.batch_size,
            samples.len()
        )));
    }
    let mut rng = synth::rng(seed);
    let mut model = LstmModel::init(FEATURES, config.hidden_size, config.residual, &mut rng);
    let scaler = fit_window_scaler(samples, ScaleMode::MinmaxUnit)?;
    let target_feature = model.target_feature;
    let prepared: Vec<Prepared> = samples
        .iter()
        .map(|s| {
            Ok(Prepared {
                seq: scaler.transform(&s.history)?,
                target: scaler.transform_value(target_feature, s.target[target_feature]),
            })
        })
        .collect::<Result<_>>()?;
    model.scaler = Some(scaler);

    let n_val = ((samples.len() as f64) * sched.validation_fraction).floor() as usize;
    let n_val = if sched.validation_fraction > 0.0 {
        n_val.max(1)
    } else {
        0
    };
    let (fit_set, val_set) = prepared.split_at(prepared.len() - n_val);
    // Without a validation slice, the training loss drives the schedule.
    let monitor = if val_set.is_empty() { fit_set } else { val_set };

    let mut log = TrainingLog::default();
    let mut params = model.params();
    let mut adam = AdamState::new(params.len(), sched.learning_rate);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0usize;
    let mut since_plateau = 0usize;

    for epoch in 1..=sched.max_epochs {
        let lr = adam.learning_rate;
        let mut train_total = 0.0;
        for batch in fit_set.chunks(sched.batch_size) {
            let mut grad = vec![0.0; params.len()];
            let scale = 1.0 / batch.len() as f64;
            for d in batch {
                let (y, caches) = model.forward_sequence(&d.seq)?;
                let err = y - d.target;
                train_total += err * err;
                let g = model.backward_sequence(&caches, 2.0 * err * scale);
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            adam.step(&mut params, &grad).map_err(|e| Error::Training {
                stage: "lstm",
                index: epoch,
                message: e.to_string(),
            })?;
            model.set_params(&params)?;
        }
        let train_loss = train_total / fit_set.len() as f64;
        let val_loss = mean_loss(&model, monitor)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Training {
                stage: "lstm",
                index: epoch,
                message: "loss diverged to a non-finite value".into(),
            });
        }
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
        });

        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, params.clone()));
            log.best_epoch = Some(epoch);
            since_best = 0;
            since_plateau = 0;
        } else {
            since_best += 1;
            since_plateau += 1;
        }
        if since_best >= sched.patience {
            log.stopped_early = true;
            break;
        }
        if since_plateau >= sched.plateau_patience {
            adam.learning_rate *= sched.plateau_factor;
            log.plateau_epochs.push(epoch);
            since_plateau = 0;
        }
    }
    if let Some((_, p)) = best {
        model.set_params(&p)?;
    }
    Ok((model, log))
}
