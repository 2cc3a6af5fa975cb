use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam optimizer state for one flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Bias-corrected Adam update, in place. Rejects non-finite gradients
    /// before touching any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::dimension(
                "adam parameters",
                self.first_moment.len(),
                params.len(),
            ));
        }
        if grads.len() != params.len() {
            return Err(Error::dimension(
                "adam gradients",
                params.len(),
                grads.len(),
            ));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut adam = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..5 {
            adam.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(adam.step_count, 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.02] {
            let mut adam = AdamState::new(1, 0.01);
            let mut p = vec![0.0];
            adam.step(&mut p, &[g]).unwrap();
            assert!((p[0] + 0.01 * f64::signum(g)).abs() < 1e-8);
        }
    }

    #[test]
    fn minimizes_scalar_quadratic() {
        // f(w) = (w − 3)², f'(w) = 2(w − 3)
        let mut adam = AdamState::new(1, 0.1);
        let mut w = vec![0.0];
        for _ in 0..100 {
            let g = 2.0 * (w[0] - 3.0);
            adam.step(&mut w, &[g]).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn non_finite_gradient_reports_index() {
        let mut adam = AdamState::new(3, 0.1);
        let mut p = vec![0.0; 3];
        let err = adam.step(&mut p, &[0.0, f64::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1 }));
        assert_eq!(adam.step_count, 0);
    }

    #[test]
    fn identical_inputs_give_identical_trajectories() {
        let run = || {
            let mut adam = AdamState::new(2, 0.05);
            let mut p = vec![0.3, -0.7];
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 0.01, (p[1] - 1.0).sin()];
                adam.step(&mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }
}
