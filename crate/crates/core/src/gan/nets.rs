use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{WindowSample, FEATURES};
use crate::error::{Error, Result};
use crate::numkernel::{Activation, ForwardCache, Gradients, Matrix, Network, ScalerParams};

/// Largest magnitude accepted on a scaled network input.
pub const SCALE_TOLERANCE: f64 = 1.0 + 1e-9;

/// Last-row values are clamped to this magnitude before `atanh` in the
/// residual skip.
pub const SKIP_LIMIT: f64 = 0.999;

/// Conditional generator `x̂ₜ₊₁ = G(Xₜ, sₜ)`.
///
/// The layer stack ends in a linear layer; the output is
/// `tanh(z + skip)`, where `skip` is `atanh` of the window's last row in
/// residual mode and zero otherwise. Residual mode therefore starts from
/// persistence when the last layer is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub net: Network,
    pub window: usize,
    pub noise_dim: usize,
    pub residual: bool,
    pub scaler: Option<ScalerParams>,
}

/// Forward state kept for backpropagation through the generator.
#[derive(Debug, Clone)]
pub struct GeneratorPass {
    pub cache: ForwardCache,
    pub output: Vec<f64>,
}

/// Conditional discriminator `D(x, Xₜ, sₜ)`.
///
/// With `change_scale` set, the candidate is presented as its change from
/// the window's last row divided by that per-feature scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub net: Network,
    pub window: usize,
    pub change_scale: Option<Vec<f64>>,
}

/// Flattened history followed by the sentiment scalar.
pub fn condition(history: &Matrix, sentiment: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(history.data().len() + 1);
    out.extend_from_slice(history.data());
    out.push(sentiment);
    out
}

pub fn check_scale(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !(v.abs() <= SCALE_TOLERANCE)) {
        Some(i) => Err(Error::Data(format!(
            "{what} entry {i} is {} which lies outside the (-1, 1) scale",
            values[i]
        ))),
        None => Ok(()),
    }
}

impl Generator {
    pub fn init<R: Rng + ?Sized>(
        window: usize,
        hidden: &[usize],
        noise_dim: usize,
        residual: bool,
        rng: &mut R,
    ) -> Self {
        let mut net = Network::mlp(
            window * FEATURES + 1 + noise_dim,
            hidden,
            Activation::Relu,
            FEATURES,
            Activation::Identity,
            rng,
        );
        if residual {
            let last = net.layers.len() - 1;
            net.layers[last].weights.data_mut().fill(0.0);
        }
        Self {
            net,
            window,
            noise_dim,
            residual,
            scaler: None,
        }
    }

    pub fn input_size(&self) -> usize {
        self.window * FEATURES + 1 + self.noise_dim
    }

    /// Assembles `condition ∥ noise`; absent noise means zeros.
    pub fn input(&self, condition: &[f64], noise: Option<&[f64]>) -> Result<Vec<f64>> {
        let cond_len = self.window * FEATURES + 1;
        if condition.len() != cond_len {
            return Err(Error::dimension(
                "generator condition",
                cond_len,
                condition.len(),
            ));
        }
        let mut x = Vec::with_capacity(self.input_size());
        x.extend_from_slice(condition);
        match noise {
            Some(z) if z.len() != self.noise_dim => {
                return Err(Error::dimension("generator noise", self.noise_dim, z.len()))
            }
            Some(z) => x.extend_from_slice(z),
            None => x.resize(self.input_size(), 0.0),
        }
        check_scale(&x, "generator input")?;
        Ok(x)
    }

    fn skip(&self, input: &[f64]) -> Vec<f64> {
        if !self.residual {
            return vec![0.0; FEATURES];
        }
        let start = (self.window - 1) * FEATURES;
        input[start..start + FEATURES]
            .iter()
            .map(|v| v.clamp(-SKIP_LIMIT, SKIP_LIMIT).atanh())
            .collect()
    }

    /// Runs an assembled input (see [`Generator::input`]).
    pub fn forward_pass(&self, input: &[f64]) -> Result<GeneratorPass> {
        let cache = self.net.forward_cached(input)?;
        let output = cache
            .output()
            .iter()
            .zip(self.skip(input))
            .map(|(z, k)| (z + k).tanh())
            .collect();
        Ok(GeneratorPass { cache, output })
    }

    /// Parameter gradient given the loss gradient on the output.
    pub fn backward(&self, pass: &GeneratorPass, grad_output: &[f64]) -> Result<Gradients> {
        if grad_output.len() != FEATURES {
            return Err(Error::dimension(
                "generator output gradient",
                FEATURES,
                grad_output.len(),
            ));
        }
        let grad_z: Vec<f64> = grad_output
            .iter()
            .zip(&pass.output)
            .map(|(g, o)| g * (1.0 - o * o))
            .collect();
        Ok(self.net.backward_preact(&pass.cache, &grad_z)?.0)
    }

    pub fn scaler(&self) -> Result<&ScalerParams> {
        self.scaler
            .as_ref()
            .ok_or_else(|| Error::Usage("generator scaler has not been fitted".into()))
    }
}

impl Discriminator {
    pub fn init<R: Rng + ?Sized>(window: usize, hidden: &[usize], rng: &mut R) -> Self {
        Self {
            net: Network::mlp(
                FEATURES + window * FEATURES + 1,
                hidden,
                Activation::LeakyRelu,
                1,
                Activation::Sigmoid,
                rng,
            ),
            window,
            change_scale: None,
        }
    }

    pub fn input(&self, candidate: &[f64], condition: &[f64]) -> Result<Vec<f64>> {
        if candidate.len() != FEATURES {
            return Err(Error::dimension(
                "discriminator candidate",
                FEATURES,
                candidate.len(),
            ));
        }
        let cond_len = self.window * FEATURES + 1;
        if condition.len() != cond_len {
            return Err(Error::dimension(
                "discriminator condition",
                cond_len,
                condition.len(),
            ));
        }
        let mut x = Vec::with_capacity(FEATURES + cond_len);
        match &self.change_scale {
            Some(scale) => {
                let last = &condition[(self.window - 1) * FEATURES..self.window * FEATURES];
                x.extend(
                    candidate
                        .iter()
                        .zip(last)
                        .zip(scale)
                        .map(|((c, l), s)| (c - l) / s),
                );
            }
            None => x.extend_from_slice(candidate),
        }
        x.extend_from_slice(condition);
        Ok(x)
    }

    /// Gradient with respect to the candidate, from the gradient with
    /// respect to the full network input.
    pub fn candidate_gradient(&self, grad_input: &[f64]) -> Vec<f64> {
        match &self.change_scale {
            Some(scale) => grad_input[..FEATURES]
                .iter()
                .zip(scale)
                .map(|(g, s)| g / s)
                .collect(),
            None => grad_input[..FEATURES].to_vec(),
        }
    }
}

/// Generator output for an already scaled window.
pub fn generator_forward(
    gen: &Generator,
    window: &WindowSample,
    noise: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if window.history.cols() != FEATURES {
        return Err(Error::dimension(
            "window features",
            FEATURES,
            window.history.cols(),
        ));
    }
    let x = gen.input(&condition(&window.history, window.sentiment), noise)?;
    Ok(gen.forward_pass(&x)?.output)
}

/// Noise draws averaged by [`point_forecast`].
pub const NOISE_DRAWS: usize = 64;
const NOISE_SEED: u64 = 0x5eed;

/// Point forecast for a scaled window: the plain output without a noise
/// input, otherwise the mean output over [`NOISE_DRAWS`] uniform noise
/// vectors from a fixed seed.
pub fn point_forecast(gen: &Generator, window: &WindowSample) -> Result<Vec<f64>> {
    if gen.noise_dim == 0 {
        return generator_forward(gen, window, None);
    }
    let mut rng = crate::synth::rng(NOISE_SEED);
    let mut mean = vec![0.0; FEATURES];
    let mut z = vec![0.0; gen.noise_dim];
    for _ in 0..NOISE_DRAWS {
        z.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        for (m, o) in mean
            .iter_mut()
            .zip(generator_forward(gen, window, Some(&z))?)
        {
            *m += o / NOISE_DRAWS as f64;
        }
    }
    Ok(mean)
}

/// Plausibility score of `candidate` as the day after `window` (both scaled).
pub fn discriminator_forward(
    disc: &Discriminator,
    candidate: &[f64],
    window: &WindowSample,
) -> Result<f64> {
    let x = disc.input(candidate, &condition(&window.history, window.sentiment))?;
    Ok(disc.net.forward(&x)?[0])
}

/// `ln(1 + eᶻ)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Discriminator loss `−ln D(real) − ln(1 − D(fake))` from the two logits,
/// with its derivatives with respect to each logit.
pub fn discriminator_loss(real_logit: f64, fake_logit: f64) -> (f64, f64, f64) {
    use crate::numkernel::sigmoid;
    (
        softplus(-real_logit) + softplus(fake_logit),
        sigmoid(real_logit) - 1.0,
        sigmoid(fake_logit),
    )
}

/// Non-saturating generator loss `−ln D(fake)` and its logit derivative.
pub fn generator_loss(fake_logit: f64) -> (f64, f64) {
    (
        softplus(-fake_logit),
        crate::numkernel::sigmoid(fake_logit) - 1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::check_gradient;
    use crate::synth;
    use chrono::NaiveDate;
    use rand::Rng;

    fn window(l: usize, rng: &mut impl Rng) -> WindowSample {
        let data = (0..l * FEATURES)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        WindowSample {
            history: Matrix::from_vec(l, FEATURES, data).unwrap(),
            sentiment: rng.random_range(-1.0..1.0),
            target: (0..FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target_date: NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
            context_end: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            target_index: l,
        }
    }

    fn zeroed(net: &mut Network) {
        let n = net.param_count();
        net.set_params(&vec![0.0; n]).unwrap();
    }

    #[test]
    fn output_width_is_six_for_any_window() {
        let mut rng = synth::rng(1);
        for l in [1, 5, 20] {
            let g = Generator::init(l, &[8], 0, true, &mut rng);
            let w = window(l, &mut rng);
            let out = generator_forward(&g, &w, None).unwrap();
            assert_eq!(out.len(), 6);
            assert!(out.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn zero_weights_give_tanh_of_bias() {
        let mut rng = synth::rng(2);
        let mut g = Generator::init(3, &[4, 4], 0, false, &mut rng);
        zeroed(&mut g.net);
        let last = g.net.layers.len() - 1;
        g.net.layers[last].bias = vec![0.1, -0.2, 0.3, 0.0, 2.0, -5.0];
        let out = generator_forward(&g, &window(3, &mut rng), None).unwrap();
        for (o, b) in out.iter().zip(&g.net.layers[last].bias) {
            assert_eq!(*o, b.tanh());
        }
    }

    #[test]
    fn residual_starts_at_persistence() {
        let mut rng = synth::rng(7);
        let g = Generator::init(4, &[8], 0, true, &mut rng);
        let mut w = window(4, &mut rng);
        w.history
            .row_mut(3)
            .copy_from_slice(&[0.5, -0.25, 0.0, 0.9, -0.99, 0.1]);
        let out = generator_forward(&g, &w, None).unwrap();
        for (o, v) in out.iter().zip(w.history.row(3)) {
            assert!((o - v).abs() < 1e-12);
        }
        w.history.row_mut(3)[0] = 1.0;
        assert!((generator_forward(&g, &w, None).unwrap()[0] - SKIP_LIMIT).abs() < 1e-12);
    }

    #[test]
    fn generator_output_gradient() {
        for seed in 0..10 {
            let mut rng = synth::rng(200 + seed);
            let mut g = Generator::init(3, &[6, 5], 1, seed % 2 == 0, &mut rng);
            let n = g.net.param_count();
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            g.net.set_params(&p).unwrap();
            let w = window(3, &mut rng);
            let x = g
                .input(&condition(&w.history, w.sentiment), Some(&[0.3]))
                .unwrap();
            let weights: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pass = g.forward_pass(&x).unwrap();
            let grads = g.backward(&pass, &weights).unwrap();
            let mut probe = g.clone();
            let r = check_gradient(
                &p,
                &grads.flatten(),
                |q| {
                    probe.net.set_params(q)?;
                    let out = probe.forward_pass(&x)?.output;
                    Ok(out.iter().zip(&weights).map(|(o, c)| o * c).sum())
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
    fn deterministic_without_noise() {
        let mut rng = synth::rng(3);
        let g = Generator::init(4, &[16, 8], 2, true, &mut rng);
        let w = window(4, &mut rng);
        assert_eq!(
            generator_forward(&g, &w, None).unwrap(),
            generator_forward(&g, &w, None).unwrap()
        );
    }

    #[test]
    fn point_forecast_averages_noise() {
        let mut rng = synth::rng(8);
        let mut g = Generator::init(2, &[8], 3, false, &mut rng);
        let w = window(2, &mut rng);
        let a = point_forecast(&g, &w).unwrap();
        assert_eq!(a, point_forecast(&g, &w).unwrap());
        assert!(a.iter().all(|v| v.abs() < 1.0));
        g.noise_dim = 0;
        assert!(point_forecast(&g, &w).is_err());
    }

    #[test]
    fn scale_violation_rejected() {
        let mut rng = synth::rng(4);
        let g = Generator::init(2, &[4], 0, true, &mut rng);
        let mut w = window(2, &mut rng);
        w.history.set(1, 3, 1.0 + 1e-6);
        assert!(matches!(
            generator_forward(&g, &w, None),
            Err(Error::Data(_))
        ));
        w.history.set(1, 3, 1.0 + 1e-10);
        assert!(generator_forward(&g, &w, None).is_ok());
        assert!(matches!(
            generator_forward(&g, &window(3, &mut rng), None),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_discriminator_is_half() {
        let mut rng = synth::rng(5);
        let mut d = Discriminator::init(3, &[4], &mut rng);
        zeroed(&mut d.net);
        assert_eq!(
            discriminator_forward(&d, &[0.3; 6], &window(3, &mut rng)).unwrap(),
            0.5
        );
    }

    #[test]
    fn discriminator_score_in_open_interval() {
        let mut rng = synth::rng(6);
        let d = Discriminator::init(5, &[16, 8], &mut rng);
        for _ in 0..50 {
            let w = window(5, &mut rng);
            let s = discriminator_forward(&d, &w.target, &w).unwrap();
            assert!(s > 0.0 && s < 1.0);
        }
        assert!(discriminator_forward(&d, &[0.0; 5], &window(5, &mut rng)).is_err());
    }

    #[test]
    fn score_gradient_wrt_candidate() {
        for seed in 0..10 {
            let mut rng = synth::rng(100 + seed);
            let mut d = Discriminator::init(3, &[8, 4], &mut rng);
            if seed % 2 == 1 {
                d.change_scale = Some((0..6).map(|_| rng.random_range(0.05..0.5)).collect());
            }
            let w = window(3, &mut rng);
            let cond = condition(&w.history, w.sentiment);
            let cache = d
                .net
                .forward_cached(&d.input(&w.target, &cond).unwrap())
                .unwrap();
            let (_, grad_in) = d.net.backward(&cache, &[1.0]).unwrap();
            let report = check_gradient(
                &w.target,
                &d.candidate_gradient(&grad_in),
                |c| Ok(d.net.forward(&d.input(c, &cond)?)?[0]),
                1e-5,
                1e-4,
                false,
            )
            .unwrap();
            assert!(report.passed(), "seed {seed}: {:?}", report.failures);
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert_eq!(softplus(-1000.0), 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_discriminator_limits() {
        let (d, _, _) = discriminator_loss(40.0, -40.0);
        let (g, _) = generator_loss(-40.0);
        assert!(d < 1e-15);
        assert!(g > 39.0);
    }

    #[test]
    fn loss_derivatives_match_differences() {
        let h = 1e-6;
        for &(a, b) in &[(0.3, -1.2), (-2.0, 4.0), (5.0, 0.0)] {
            let (_, gr, gf) = discriminator_loss(a, b);
            let nr = (discriminator_loss(a + h, b).0 - discriminator_loss(a - h, b).0) / (2.0 * h);
            let nf = (discriminator_loss(a, b + h).0 - discriminator_loss(a, b - h).0) / (2.0 * h);
            assert!((gr - nr).abs() < 1e-8 && (gf - nf).abs() < 1e-8);
            let (_, gg) = generator_loss(b);
            let ng = (generator_loss(b + h).0 - generator_loss(b - h).0) / (2.0 * h);
            assert!((gg - ng).abs() < 1e-8);
        }
    }
}
