//! Central-difference verification of analytic gradients.

use serde::Serialize;

use super::layer::{Activation, Network};
use crate::error::{Error, Result};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Magnitude below which gradients are compared absolutely rather than
/// relatively; central differences cannot resolve anything smaller.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Sigmoid pre-activations beyond this magnitude are treated as saturated.
pub const SATURATION_THRESHOLD: f64 = 30.0;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamMismatch {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    /// Mismatches that count against the check.
    pub failures: Vec<ParamMismatch>,
    /// Mismatches excused because a sigmoid unit was saturated.
    pub flagged: Vec<ParamMismatch>,
    pub saturated: bool,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `analytic` against central differences of `loss` at `params`.
pub fn check_gradient<F>(
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    step: f64,
    tolerance: f64,
    saturated: bool,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if analytic.len() != params.len() {
        return Err(Error::dimension(
            "analytic gradient",
            params.len(),
            analytic.len(),
        ));
    }
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        checked: params.len(),
        max_relative_error: 0.0,
        tolerance,
        failures: Vec::new(),
        flagged: Vec::new(),
        saturated,
    };
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = loss(&probe)?;
        probe[i] = orig - step;
        let minus = loss(&probe)?;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let rel = relative_error(analytic[i], numeric);
        report.max_relative_error = report.max_relative_error.max(rel);
        if rel > tolerance {
            let m = ParamMismatch {
                index: i,
                analytic: analytic[i],
                numeric,
                relative_error: rel,
            };
            if saturated {
                report.flagged.push(m);
            } else {
                report.failures.push(m);
            }
        }
    }
    Ok(report)
}

/// Gradient check of a dense network under squared-error loss
/// `Σ (output − target)²`.
pub fn finite_difference_check(
    network: &Network,
    input: &[f64],
    target: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if target.len() != network.output_size() {
        return Err(Error::dimension(
            "gradient-check target",
            network.output_size(),
            target.len(),
        ));
    }
    let cache = network.forward_cached(input)?;
    let saturated = network.layers.iter().zip(&cache.preacts).any(|(layer, z)| {
        layer.activation == Activation::Sigmoid && z.iter().any(|v| v.abs() > SATURATION_THRESHOLD)
    });
    let grad_out: Vec<f64> = cache
        .output()
        .iter()
        .zip(target)
        .map(|(o, t)| 2.0 * (o - t))
        .collect();
    let (grads, _) = network.backward(&cache, &grad_out)?;
    let mut scratch = network.clone();
    check_gradient(
        &network.params(),
        &grads.flatten(),
        |p| {
            scratch.set_params(p)?;
            let out = scratch.forward(input)?;
            Ok(out.iter().zip(target).map(|(o, t)| (o - t).powi(2)).sum())
        },
        step,
        tolerance,
        saturated,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::layer::DenseLayer;
    use crate::numkernel::matrix::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn linear_layer_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::mlp(
            4,
            &[],
            Activation::Identity,
            3,
            Activation::Identity,
            &mut rng,
        );
        let report = finite_difference_check(
            &net,
            &random_vec(&mut rng, 4),
            &random_vec(&mut rng, 3),
            DEFAULT_STEP,
            1e-8,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_relative_error < 1e-8);
    }

    #[test]
    fn three_layer_tanh_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let net = Network::mlp(5, &[7, 6], Activation::Tanh, 2, Activation::Tanh, &mut rng);
            let report = finite_difference_check(
                &net,
                &random_vec(&mut rng, 5),
                &random_vec(&mut rng, 2),
                DEFAULT_STEP,
                1e-4,
            )
            .unwrap();
            assert!(
                report.max_relative_error < 1e-4,
                "{}",
                report.max_relative_error
            );
        }
    }

    #[test]
    fn every_activation_two_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let acts = [
            Activation::Relu,
            Activation::LeakyRelu,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Identity,
        ];
        for hidden in acts {
            for out in acts {
                for _ in 0..10 {
                    let mut net = Network::mlp(5, &[6], hidden, 2, out, &mut rng);
                    // random biases keep rectifier pre-activations off their kink
                    let p = random_vec(&mut rng, net.param_count());
                    net.set_params(&p).unwrap();
                    let report = finite_difference_check(
                        &net,
                        &random_vec(&mut rng, 5),
                        &random_vec(&mut rng, 2),
                        DEFAULT_STEP,
                        1e-4,
                    )
                    .unwrap();
                    assert!(report.passed(), "{hidden:?}/{out:?}: {report:?}");
                }
            }
        }
    }

    #[test]
    fn saturated_sigmoid_is_flagged_not_failed() {
        let layer = DenseLayer::new(
            Matrix::from_vec(1, 1, vec![100.0]).unwrap(),
            vec![0.0],
            Activation::Sigmoid,
        )
        .unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let report = finite_difference_check(&net, &[0.5], &[0.0], DEFAULT_STEP, 1e-12).unwrap();
        assert!(report.saturated);
        assert!(report.passed());
    }
}
