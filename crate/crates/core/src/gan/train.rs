use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nets::{
    check_scale, condition, discriminator_loss, generator_loss, Discriminator, Generator,
    GeneratorPass,
};
use crate::data::{fit_window_scaler, WindowSample, FEATURES};
use crate::error::{Error, Result};
use crate::numkernel::{AdamState, Gradients, ScaleMode};
use crate::synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanSchedule {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub d_steps: usize,
}

impl Default for GanSchedule {
    fn default() -> Self {
        Self {
            learning_rate: 0.0002,
            batch_size: 5,
            epochs: 300,
            d_steps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// Width of the optional uniform noise input; 0 disables it.
    pub noise_dim: usize,
    /// Skip connection from the window's last row to the output.
    pub residual: bool,
    /// Weight of a supervised squared-error term added to the generator loss.
    pub l2_weight: f64,
    /// Present the discriminator with standardised day-over-day changes.
    pub relative_discriminator: bool,
    /// Decay of the exponential moving average of generator weights that is
    /// returned after training; 0 returns the last iterate.
    pub generator_averaging: f64,
    /// Feed generated rows back into the holdout context instead of real ones.
    pub autoregressive: bool,
    pub schedule: GanSchedule,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            generator_hidden: vec![128, 64],
            discriminator_hidden: vec![64, 32],
            noise_dim: 0,
            residual: true,
            relative_discriminator: true,
            generator_averaging: 0.995,
            l2_weight: 0.0,
            autoregressive: false,
            schedule: GanSchedule::default(),
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("gan: {m}")));
        let s = &self.schedule;
        if !(s.learning_rate >= 0.0 && s.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        if s.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if s.d_steps == 0 {
            return bad("d_steps must be at least 1");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight must be non-negative");
        }
        if !(0.0..1.0).contains(&self.generator_averaging) {
            return bad("generator_averaging must lie in [0, 1)");
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// One Adam state per network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanOptimizer {
    pub generator: AdamState,
    pub discriminator: AdamState,
}

impl GanOptimizer {
    pub fn new(gen: &Generator, disc: &Discriminator, learning_rate: f64) -> Self {
        Self {
            generator: AdamState::new(gen.net.param_count(), learning_rate),
            discriminator: AdamState::new(disc.net.param_count(), learning_rate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossLog {
    pub steps: Vec<StepLoss>,
}

impl LossLog {
    /// CSV `step,d_loss,g_loss`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["step", "d_loss", "g_loss"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.d_loss.to_string(),
                s.g_loss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Losses and parameter gradients of both players at fixed parameters.
#[derive(Debug, Clone)]
pub struct AdversarialGradients {
    pub d_loss: f64,
    pub g_loss: f64,
    pub discriminator: Gradients,
    pub generator: Gradients,
}

struct Conditioned {
    cond: Vec<f64>,
    target: Vec<f64>,
}

fn prepare(batch: &[WindowSample], gen: &Generator) -> Result<Vec<Conditioned>> {
    batch
        .iter()
        .map(|s| {
            if s.history.rows() != gen.window {
                return Err(Error::dimension(
                    "window length",
                    gen.window,
                    s.history.rows(),
                ));
            }
            if s.target.len() != FEATURES {
                return Err(Error::dimension(
                    "target features",
                    FEATURES,
                    s.target.len(),
                ));
            }
            check_scale(&s.target, "target")?;
            Ok(Conditioned {
                cond: condition(&s.history, s.sentiment),
                target: s.target.clone(),
            })
        })
        .collect()
}

fn generate(
    gen: &Generator,
    batch: &[Conditioned],
    noise: &[Vec<f64>],
) -> Result<Vec<GeneratorPass>> {
    batch
        .iter()
        .zip(noise)
        .map(|(c, z)| {
            gen.forward_pass(&gen.input(&c.cond, (!z.is_empty()).then_some(z.as_slice()))?)
        })
        .collect()
}

/// Mean discriminator loss over the batch and its gradient.
fn discriminator_pass(
    disc: &Discriminator,
    batch: &[Conditioned],
    fakes: &[GeneratorPass],
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(&disc.net);
    let mut loss = 0.0;
    for (c, fake) in batch.iter().zip(fakes) {
        let real = disc.net.forward_cached(&disc.input(&c.target, &c.cond)?)?;
        let gen = disc
            .net
            .forward_cached(&disc.input(&fake.output, &c.cond)?)?;
        let (l, gr, gf) = discriminator_loss(
            real.output_preactivation()[0],
            gen.output_preactivation()[0],
        );
        loss += l;
        grads.add_assign(&disc.net.backward_preact(&real, &[gr])?.0);
        grads.add_assign(&disc.net.backward_preact(&gen, &[gf])?.0);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

/// Mean generator loss over the batch and its gradient, backpropagated
/// through the (fixed) discriminator.
fn generator_pass(
    gen: &Generator,
    disc: &Discriminator,
    batch: &[Conditioned],
    fakes: &[GeneratorPass],
    l2_weight: f64,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(&gen.net);
    let mut loss = 0.0;
    for (c, fake) in batch.iter().zip(fakes) {
        let out = &fake.output;
        let judged = disc.net.forward_cached(&disc.input(out, &c.cond)?)?;
        let (l, g) = generator_loss(judged.output_preactivation()[0]);
        let (_, grad_in) = disc.net.backward_preact(&judged, &[g])?;
        let mut grad_out = disc.candidate_gradient(&grad_in);
        let mut sq = 0.0;
        for ((go, o), t) in grad_out.iter_mut().zip(out).zip(&c.target) {
            sq += (o - t).powi(2);
            *go += 2.0 * l2_weight * (o - t) / FEATURES as f64;
        }
        loss += l + l2_weight * sq / FEATURES as f64;
        grads.add_assign(&gen.backward(fake, &grad_out)?);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

fn draw_noise(gen: &Generator, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..gen.noise_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect()
}

/// Both adversarial losses and their gradients for a scaled batch, without
/// updating anything. `noise` holds one vector per sample when the generator
/// has a noise input, otherwise zeros are used.
pub fn adversarial_gradients(
    gen: &Generator,
    disc: &Discriminator,
    batch: &[WindowSample],
    noise: Option<&[Vec<f64>]>,
    l2_weight: f64,
) -> Result<AdversarialGradients> {
    let prepared = prepare(batch, gen)?;
    let zeros = vec![Vec::new(); batch.len()];
    let fakes = generate(gen, &prepared, noise.unwrap_or(&zeros))?;
    let (d_loss, discriminator) = discriminator_pass(disc, &prepared, &fakes)?;
    let (g_loss, generator) = generator_pass(gen, disc, &prepared, &fakes, l2_weight)?;
    Ok(AdversarialGradients {
        d_loss,
        g_loss,
        discriminator,
        generator,
    })
}

/// One alternating update on a scaled batch: `d_steps` discriminator steps,
/// then one non-saturating generator step against the updated discriminator.
/// Returns `(d_loss, g_loss)` as measured before each network's last update.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    gen: &mut Generator,
    disc: &mut Discriminator,
    batch: &[WindowSample],
    optim: &mut GanOptimizer,
    config: &GanConfig,
    rng: &mut ChaCha8Rng,
    step: usize,
) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::Usage("empty GAN batch".into()));
    }
    let diverged = |what: &str, v: f64| Error::Training {
        stage: "gan step",
        index: step,
        message: format!("{what} is {v}"),
    };
    let prepared = prepare(batch, gen)?;
    let mut d_loss = f64::NAN;
    let mut fakes = Vec::new();
    for _ in 0..config.schedule.d_steps {
        let noise = draw_noise(gen, prepared.len(), rng);
        fakes = generate(gen, &prepared, &noise)?;
        let (loss, grads) = discriminator_pass(disc, &prepared, &fakes)?;
        if !loss.is_finite() {
            return Err(diverged("discriminator loss", loss));
        }
        d_loss = loss;
        disc.net.apply_adam(&mut optim.discriminator, &grads)?;
    }
    let (g_loss, grads) = generator_pass(gen, disc, &prepared, &fakes, config.l2_weight)?;
    if !g_loss.is_finite() {
        return Err(diverged("generator loss", g_loss));
    }
    gen.net.apply_adam(&mut optim.generator, &grads)?;
    Ok((d_loss, g_loss))
}

/// Scales a raw window with the generator's fitted scaler.
pub fn scale_window(gen: &Generator, sample: &WindowSample) -> Result<WindowSample> {
    let scaler = gen.scaler()?;
    Ok(WindowSample {
        history: scaler.transform(&sample.history)?,
        target: scaler.transform_row(&sample.target)?,
        ..sample.clone()
    })
}

/// Root-mean-square day-over-day change of each scaled feature, floored so
/// that constant features stay well defined.
fn change_scale(scaled: &[WindowSample]) -> Vec<f64> {
    let mut sq = [0.0; FEATURES];
    for s in scaled {
        let last = s.history.row(s.history.rows() - 1);
        for (acc, (t, l)) in sq.iter_mut().zip(s.target.iter().zip(last)) {
            *acc += (t - l).powi(2);
        }
    }
    sq.iter()
        .map(|v| (v / scaled.len() as f64).sqrt().max(1e-3))
        .collect()
}

/// Fixed-epoch adversarial training on raw (unscaled) chronological training
/// windows. Batches are contiguous blocks; only their order is shuffled.
pub fn train(
    samples: &[WindowSample],
    config: &GanConfig,
    seed: u64,
) -> Result<(Generator, Discriminator, LossLog)> {
    config.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Insufficient("GAN training needs at least one window".into()))?;
    let window = first.window_len();
    let mut rng = synth::rng(seed);
    let mut gen = Generator::init(
        window,
        &config.generator_hidden,
        config.noise_dim,
        config.residual,
        &mut rng,
    );
    let mut disc = Discriminator::init(window, &config.discriminator_hidden, &mut rng);
    gen.scaler = Some(fit_window_scaler(samples, ScaleMode::MinmaxSigned)?);
    let scaled: Vec<WindowSample> = samples
        .iter()
        .map(|s| scale_window(&gen, s))
        .collect::<Result<_>>()?;
    if config.relative_discriminator {
        disc.change_scale = Some(change_scale(&scaled));
    }

    let mut optim = GanOptimizer::new(&gen, &disc, config.schedule.learning_rate);
    let mut order: Vec<usize> = (0..scaled.len().div_ceil(config.schedule.batch_size)).collect();
    let mut log = LossLog::default();
    let decay = config.generator_averaging;
    let mut average = gen.net.params();
    for _ in 0..config.schedule.epochs {
        order.shuffle(&mut rng);
        for &b in &order {
            let start = b * config.schedule.batch_size;
            let end = (start + config.schedule.batch_size).min(scaled.len());
            let step = log.steps.len();
            let (d_loss, g_loss) = train_step(
                &mut gen,
                &mut disc,
                &scaled[start..end],
                &mut optim,
                config,
                &mut rng,
                step,
            )?;
            log.steps.push(StepLoss {
                step,
                d_loss,
                g_loss,
            });
            if decay > 0.0 {
                for (a, p) in average.iter_mut().zip(gen.net.params()) {
                    *a = decay * *a + (1.0 - decay) * p;
                }
            }
        }
    }
    if decay > 0.0 {
        gen.net.set_params(&average)?;
    }
    Ok((gen, disc, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{check_gradient, Matrix, Network};
    use chrono::NaiveDate;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    fn scaled_window(l: usize, rng: &mut impl Rng) -> WindowSample {
        let data = (0..l * FEATURES)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        WindowSample {
            history: Matrix::from_vec(l, FEATURES, data).unwrap(),
            sentiment: rng.random_range(-1.0..1.0),
            target: (0..FEATURES).map(|_| rng.random_range(-0.9..0.9)).collect(),
            target_date: NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
            context_end: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            target_index: l,
        }
    }

    fn hash(net: &Network) -> u64 {
        let mut h = DefaultHasher::new();
        for p in net.params() {
            p.to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn tiny(seed: u64, noise_dim: usize) -> (Generator, Discriminator, Vec<WindowSample>) {
        let mut rng = synth::rng(seed);
        let gen = Generator::init(3, &[6, 5], noise_dim, seed % 2 == 1, &mut rng);
        let mut disc = Discriminator::init(3, &[6, 4], &mut rng);
        let batch: Vec<WindowSample> = (0..5).map(|_| scaled_window(3, &mut rng)).collect();
        if seed % 3 == 0 {
            disc.change_scale = Some(change_scale(&batch));
        }
        (gen, disc, batch)
    }

    #[test]
    fn discriminator_loss_gradient() {
        for seed in 0..10 {
            let (gen, disc, batch) = tiny(seed, 0);
            let g = adversarial_gradients(&gen, &disc, &batch, None, 0.0).unwrap();
            let mut probe = disc.clone();
            let r = check_gradient(
                &disc.net.params(),
                &g.discriminator.flatten(),
                |p| {
                    probe.net.set_params(p)?;
                    Ok(adversarial_gradients(&gen, &probe, &batch, None, 0.0)?.d_loss)
                },
                1e-5,
                1e-4,
                false,
            )
            .unwrap();
            assert!(r.passed(), "seed {seed}: {:?}", r.failures);
        }
    }

    #[test]
    fn generator_loss_gradient() {
        for seed in 0..10 {
            let (gen, disc, batch) = tiny(seed, 2);
            let mut rng = synth::rng(seed + 50);
            let noise = draw_noise(&gen, batch.len(), &mut rng);
            let l2 = if seed % 2 == 0 { 0.0 } else { 0.7 };
            let g = adversarial_gradients(&gen, &disc, &batch, Some(&noise), l2).unwrap();
            let mut probe = gen.clone();
            let r = check_gradient(
                &gen.net.params(),
                &g.generator.flatten(),
                |p| {
                    probe.net.set_params(p)?;
                    Ok(adversarial_gradients(&probe, &disc, &batch, Some(&noise), l2)?.g_loss)
                },
                1e-5,
                1e-4,
                false,
            )
            .unwrap();
            assert!(r.passed(), "seed {seed}: {:?}", r.failures);
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let (mut gen, mut disc, batch) = tiny(1, 0);
        let config = GanConfig {
            schedule: GanSchedule {
                learning_rate: 0.0,
                ..GanSchedule::default()
            },
            ..GanConfig::default()
        };
        let before = (gen.clone(), disc.clone());
        let mut optim = GanOptimizer::new(&gen, &disc, 0.0);
        let (d, g) = train_step(
            &mut gen,
            &mut disc,
            &batch,
            &mut optim,
            &config,
            &mut synth::rng(0),
            0,
        )
        .unwrap();
        assert!(d.is_finite() && g.is_finite() && d > 0.0 && g > 0.0);
        assert_eq!((gen, disc), before);
    }

    #[test]
    fn step_counts_and_isolation() {
        for d_steps in [1, 3] {
            let (mut gen, mut disc, batch) = tiny(2, 1);
            let config = GanConfig {
                schedule: GanSchedule {
                    d_steps,
                    ..GanSchedule::default()
                },
                ..GanConfig::default()
            };
            let mut optim = GanOptimizer::new(&gen, &disc, config.schedule.learning_rate);
            let (g0, d0) = (hash(&gen.net), hash(&disc.net));
            let mut rng = synth::rng(9);
            train_step(
                &mut gen, &mut disc, &batch, &mut optim, &config, &mut rng, 0,
            )
            .unwrap();
            assert_eq!(optim.discriminator.step_count, d_steps as u64);
            assert_eq!(optim.generator.step_count, 1);
            assert_ne!(hash(&gen.net), g0);
            assert_ne!(hash(&disc.net), d0);
        }
    }

    #[test]
    fn generator_step_leaves_discriminator_alone() {
        let (gen, disc, batch) = tiny(3, 0);
        let prepared = prepare(&batch, &gen).unwrap();
        let fakes = generate(&gen, &prepared, &vec![Vec::new(); batch.len()]).unwrap();
        let d_hash = hash(&disc.net);
        let (_, grads) = generator_pass(&gen, &disc, &prepared, &fakes, 0.0).unwrap();
        let mut g2 = gen.clone();
        g2.net
            .apply_adam(&mut AdamState::new(gen.net.param_count(), 0.01), &grads)
            .unwrap();
        assert_eq!(hash(&disc.net), d_hash);
        let g_hash = hash(&gen.net);
        let (_, dgrads) = discriminator_pass(&disc, &prepared, &fakes).unwrap();
        assert!(!dgrads.is_zero());
        assert_eq!(hash(&gen.net), g_hash);
    }

    #[test]
    fn perfect_discriminator_losses() {
        let (gen, mut disc, batch) = tiny(4, 0);
        // Judge purely on the first candidate feature: reals sit near +1,
        // while a generator with a large negative bias emits ≈ −1 there.
        let n = disc.net.param_count();
        disc.net.set_params(&vec![0.0; n]).unwrap();
        let last = disc.net.layers.len() - 1;
        for l in 0..last {
            disc.net.layers[l].weights.set(0, 0, 1.0);
        }
        disc.net.layers[last].weights.set(0, 0, 80.0);
        disc.net.layers[last].bias[0] = -40.0;
        let mut gen = gen;
        let gl = gen.net.layers.len() - 1;
        gen.net.layers[gl]
            .weights
            .data_mut()
            .iter_mut()
            .for_each(|w| *w = 0.0);
        gen.net.layers[gl].bias[0] = -20.0;
        let batch: Vec<WindowSample> = batch
            .into_iter()
            .map(|mut s| {
                s.target[0] = 1.0;
                s
            })
            .collect();
        let g = adversarial_gradients(&gen, &disc, &batch, None, 0.0).unwrap();
        assert!(g.d_loss < 1e-10, "{}", g.d_loss);
        assert!(g.g_loss > 39.0, "{}", g.g_loss);
    }

    fn raw_samples(n: usize, l: usize) -> Vec<WindowSample> {
        let a = synth::sentiment_jump_asset(1, n + l, 100.0, 0.9, 1.0, 3.0);
        crate::data::make_windows(&a, l, Default::default()).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let samples = raw_samples(30, 4);
        let config = GanConfig {
            schedule: GanSchedule {
                epochs: 0,
                ..GanSchedule::default()
            },
            ..GanConfig::default()
        };
        let (gen, disc, log) = train(&samples, &config, 7).unwrap();
        let mut rng = synth::rng(7);
        let g0 = Generator::init(4, &config.generator_hidden, 0, true, &mut rng);
        let d0 = Discriminator::init(4, &config.discriminator_hidden, &mut rng);
        assert_eq!(gen.net, g0.net);
        assert_eq!(disc.net, d0.net);
        assert!(disc.change_scale.is_some());
        assert!(log.steps.is_empty());
        assert!(gen.scaler.is_some());
    }

    #[test]
    fn same_seed_same_networks() {
        let samples = raw_samples(40, 4);
        let config = GanConfig {
            generator_hidden: vec![16],
            discriminator_hidden: vec![8],
            noise_dim: 2,
            schedule: GanSchedule {
                epochs: 3,
                ..GanSchedule::default()
            },
            ..GanConfig::default()
        };
        let a = train(&samples, &config, 11).unwrap();
        let b = train(&samples, &config, 11).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        assert_eq!(a.2.steps.len(), 3 * 8);
        let c = train(&samples, &config, 12).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn loss_log_csv() {
        let log = LossLog {
            steps: vec![StepLoss {
                step: 0,
                d_loss: 1.5,
                g_loss: 0.5,
            }],
        };
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "step,d_loss,g_loss\n0,1.5,0.5\n"
        );
    }

    #[test]
    fn config_validation() {
        let mut c = GanConfig::default();
        assert!(c.validate().is_ok());
        c.schedule.batch_size = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let parsed: std::result::Result<GanConfig, _> = toml::from_str("bogus = 1");
        assert!(parsed.is_err());
    }
}
