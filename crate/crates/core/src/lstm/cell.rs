use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{WindowSample, CLOSE, FEATURES};
use crate::error::{Error, Result};
use crate::numkernel::{sigmoid, Activation, DenseLayer, Matrix, ScalerParams};

/// One gate's affine map `W x + U h + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    /// `hidden × input`.
    pub input_weights: Matrix,
    /// `hidden × hidden`.
    pub recurrent_weights: Matrix,
    pub bias: Vec<f64>,
}

impl Gate {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            input_weights: Matrix::zeros(hidden, input),
            recurrent_weights: Matrix::zeros(hidden, hidden),
            bias: vec![0.0; hidden],
        }
    }

    fn init<R: Rng + ?Sized>(hidden: usize, input: usize, bias: f64, rng: &mut R) -> Self {
        let mut gate = Self::zeros(hidden, input);
        let limit = (6.0 / (input + hidden) as f64).sqrt();
        let u = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        for w in gate.input_weights.data_mut() {
            *w = u.sample(rng);
        }
        let limit = (6.0 / (2 * hidden) as f64).sqrt();
        let u = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        for w in gate.recurrent_weights.data_mut() {
            *w = u.sample(rng);
        }
        gate.bias.fill(bias);
        gate
    }

    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hidden = self.bias.len();
        let input = x.len();
        let w = self.input_weights.data();
        let u = self.recurrent_weights.data();
        (0..hidden)
            .map(|r| {
                let mut z = self.bias[r];
                let wr = &w[r * input..(r + 1) * input];
                for k in 0..input {
                    z += wr[k] * x[k];
                }
                let ur = &u[r * hidden..(r + 1) * hidden];
                for k in 0..hidden {
                    z += ur[k] * h[k];
                }
                z
            })
            .collect()
    }

    fn param_count(&self) -> usize {
        self.input_weights.data().len() + self.recurrent_weights.data().len() + self.bias.len()
    }
}

/// Hidden and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate activations and states of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Single-layer LSTM with a linear head on the final hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub hidden_size: usize,
    pub input_size: usize,
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub output_gate: Gate,
    pub candidate_gate: Gate,
    /// `1 × hidden`, identity activation.
    pub head: DenseLayer,
    /// When set, each scaled window is centred on its last row before the
    /// recurrence and the head predicts the change from the last scaled
    /// target value, making the model invariant to the price level.
    pub residual: bool,
    /// Feature column being forecast.
    pub target_feature: usize,
    pub scaler: Option<ScalerParams>,
}

impl LstmModel {
    /// Glorot-uniform weights; forget-gate bias 1, other biases 0. A residual
    /// head starts at zero so the untrained model is the persistence forecast.
    pub fn init<R: Rng + ?Sized>(
        input_size: usize,
        hidden_size: usize,
        residual: bool,
        rng: &mut R,
    ) -> Self {
        let input_gate = Gate::init(hidden_size, input_size, 0.0, rng);
        let forget_gate = Gate::init(hidden_size, input_size, 1.0, rng);
        let output_gate = Gate::init(hidden_size, input_size, 0.0, rng);
        let candidate_gate = Gate::init(hidden_size, input_size, 0.0, rng);
        let mut head = DenseLayer::init(hidden_size, 1, Activation::Identity, rng);
        if residual {
            head.weights.data_mut().fill(0.0);
        }
        Self {
            hidden_size,
            input_size,
            input_gate,
            forget_gate,
            output_gate,
            candidate_gate,
            head,
            residual,
            target_feature: CLOSE,
            scaler: None,
        }
    }

    /// All-zero parameters.
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            hidden_size,
            input_size,
            input_gate: Gate::zeros(hidden_size, input_size),
            forget_gate: Gate::zeros(hidden_size, input_size),
            output_gate: Gate::zeros(hidden_size, input_size),
            candidate_gate: Gate::zeros(hidden_size, input_size),
            head: DenseLayer::new(
                Matrix::zeros(1, hidden_size),
                vec![0.0],
                Activation::Identity,
            )
            .expect("consistent head"),
            residual: false,
            target_feature: CLOSE,
            scaler: None,
        }
    }

    fn gates(&self) -> [&Gate; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.output_gate,
            &self.candidate_gate,
        ]
    }

    fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate_gate,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.gates().iter().map(|g| g.param_count()).sum::<usize>() + self.head.param_count()
    }

    /// Flattened parameters: per gate (input, forget, output, candidate)
    /// `W`, `U`, `b`; then head weights and bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in self.gates() {
            out.extend_from_slice(g.input_weights.data());
            out.extend_from_slice(g.recurrent_weights.data());
            out.extend_from_slice(&g.bias);
        }
        out.extend_from_slice(self.head.weights.data());
        out.extend_from_slice(&self.head.bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dimension(
                "lstm parameters",
                self.param_count(),
                params.len(),
            ));
        }
        let mut rest = params;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        for g in self.gates_mut() {
            take(g.input_weights.data_mut());
            take(g.recurrent_weights.data_mut());
            take(&mut g.bias);
        }
        take(self.head.weights.data_mut());
        take(&mut self.head.bias);
        Ok(())
    }

    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let i: Vec<f64> = self
            .input_gate
            .preactivation(x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let f: Vec<f64> = self
            .forget_gate
            .preactivation(x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let o: Vec<f64> = self
            .output_gate
            .preactivation(x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let g: Vec<f64> = self
            .candidate_gate
            .preactivation(x, h_prev)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let c: Vec<f64> = (0..self.hidden_size)
            .map(|k| f[k] * c_prev[k] + i[k] * g[k])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..self.hidden_size).map(|k| o[k] * tanh_c[k]).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            c,
            tanh_c,
            h,
        }
    }

    /// One cell update `(h, c) → (h', c')`.
    pub fn cell_forward(&self, x: &[f64], state: &CellState) -> Result<CellState> {
        if x.len() != self.input_size {
            return Err(Error::dimension("lstm input", self.input_size, x.len()));
        }
        if state.h.len() != self.hidden_size || state.c.len() != self.hidden_size {
            return Err(Error::dimension(
                "lstm state",
                self.hidden_size,
                state.h.len().max(state.c.len()),
            ));
        }
        let s = self.step(x, &state.h, &state.c);
        Ok(CellState { h: s.h, c: s.c })
    }

    /// Runs the sequence (rows are time steps) from zero state and applies
    /// the head; returns the scaled prediction and per-step caches.
    pub fn forward_sequence(&self, seq: &Matrix) -> Result<(f64, Vec<StepCache>)> {
        if seq.cols() != self.input_size {
            return Err(Error::dimension(
                "lstm sequence width",
                self.input_size,
                seq.cols(),
            ));
        }
        if seq.rows() == 0 {
            return Err(Error::Usage("lstm sequence is empty".into()));
        }
        let last = seq.row(seq.rows() - 1);
        let mut caches: Vec<StepCache> = Vec::with_capacity(seq.rows());
        let zero = vec![0.0; self.hidden_size];
        let mut x = vec![0.0; self.input_size];
        for t in 0..seq.rows() {
            let (h, c) = match caches.last() {
                Some(prev) => (&prev.h, &prev.c),
                None => (&zero, &zero),
            };
            x.copy_from_slice(seq.row(t));
            if self.residual {
                for (v, l) in x.iter_mut().zip(last) {
                    *v -= l;
                }
            }
            let s = self.step(&x, h, c);
            caches.push(s);
        }
        let h_last = &caches.last().expect("non-empty").h;
        let mut y = self.head.forward(h_last)?[0];
        if self.residual {
            y += seq.get(seq.rows() - 1, self.target_feature);
        }
        Ok((y, caches))
    }

    /// Gradient of a loss with `∂loss/∂ŷ = dy` through the unrolled sequence,
    /// in [`LstmModel::params`] order.
    pub fn backward_sequence(&self, caches: &[StepCache], dy: f64) -> Vec<f64> {
        let hs = self.hidden_size;
        let is = self.input_size;
        let gates = self.gates();
        let mut dw: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0; hs * is]).collect();
        let mut du: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0; hs * hs]).collect();
        let mut db: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0; hs]).collect();

        let h_last = &caches.last().expect("non-empty").h;
        let head_w = self.head.weights.data();
        let d_head_w: Vec<f64> = h_last.iter().map(|h| h * dy).collect();
        let mut dh: Vec<f64> = head_w.iter().map(|w| w * dy).collect();
        let mut dc = vec![0.0; hs];
        let mut dz = vec![vec![0.0; hs]; 4];

        for s in caches.iter().rev() {
            for k in 0..hs {
                let do_ = dh[k] * s.tanh_c[k];
                dc[k] += dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let di = dc[k] * s.g[k];
                let dg = dc[k] * s.i[k];
                let df = dc[k] * s.c_prev[k];
                dz[0][k] = di * s.i[k] * (1.0 - s.i[k]);
                dz[1][k] = df * s.f[k] * (1.0 - s.f[k]);
                dz[2][k] = do_ * s.o[k] * (1.0 - s.o[k]);
                dz[3][k] = dg * (1.0 - s.g[k] * s.g[k]);
                dc[k] *= s.f[k];
            }
            let mut dh_prev = vec![0.0; hs];
            for gi in 0..4 {
                let u = gates[gi].recurrent_weights.data();
                for r in 0..hs {
                    let z = dz[gi][r];
                    if z == 0.0 {
                        continue;
                    }
                    db[gi][r] += z;
                    let wrow = &mut dw[gi][r * is..(r + 1) * is];
                    for k in 0..is {
                        wrow[k] += z * s.x[k];
                    }
                    let urow = &mut du[gi][r * hs..(r + 1) * hs];
                    let uw = &u[r * hs..(r + 1) * hs];
                    for k in 0..hs {
                        urow[k] += z * s.h_prev[k];
                        dh_prev[k] += uw[k] * z;
                    }
                }
            }
            dh = dh_prev;
        }

        let mut out = Vec::with_capacity(self.param_count());
        for gi in 0..4 {
            out.extend_from_slice(&dw[gi]);
            out.extend_from_slice(&du[gi]);
            out.extend_from_slice(&db[gi]);
        }
        out.extend_from_slice(&d_head_w);
        out.push(dy);
        out
    }

    fn scaler(&self) -> Result<&ScalerParams> {
        self.scaler
            .as_ref()
            .ok_or_else(|| Error::Usage("LSTM scaler has not been fitted".into()))
    }

    /// Scales a raw history window with the fitted scaler.
    pub fn scale_history(&self, history: &Matrix) -> Result<Matrix> {
        self.scaler()?.transform(history)
    }

    /// Next-day forecast of the target feature in original units.
    pub fn predict(&self, window: &WindowSample) -> Result<f64> {
        if window.history.cols() != FEATURES {
            return Err(Error::dimension(
                "window width",
                FEATURES,
                window.history.cols(),
            ));
        }
        let scaled = self.scale_history(&window.history)?;
        let (y, _) = self.forward_sequence(&scaled)?;
        let out = self.scaler()?.inverse_value(self.target_feature, y);
        if !out.is_finite() {
            return Err(Error::Data(format!(
                "non-finite LSTM forecast for {}",
                window.target_date
            )));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::gradcheck::{check_gradient, DEFAULT_STEP};
    use crate::synth;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_weights_step() {
        let m = LstmModel::zeros(3, 2);
        let s = m
            .cell_forward(
                &[1.0, -2.0, 0.5],
                &CellState {
                    h: vec![0.3, -0.1],
                    c: vec![2.0, -4.0],
                },
            )
            .unwrap();
        assert_eq!(s.c, vec![1.0, -2.0]);
        assert_eq!(s.h, vec![0.5 * 1.0f64.tanh(), 0.5 * (-2.0f64).tanh()]);
    }

    #[test]
    fn zero_state_zero_input() {
        let m = LstmModel::zeros(3, 2);
        let s = m.cell_forward(&[0.0; 3], &CellState::zeros(2)).unwrap();
        assert_eq!(s.h, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_errors() {
        let m = LstmModel::zeros(3, 2);
        assert!(m.cell_forward(&[0.0; 4], &CellState::zeros(2)).is_err());
        assert!(m.cell_forward(&[0.0; 3], &CellState::zeros(3)).is_err());
    }

    #[test]
    fn gates_are_bounded() {
        let mut rng = synth::rng(4);
        let m = LstmModel::init(6, 8, false, &mut rng);
        for _ in 0..20 {
            let x: Vec<f64> = (0..6)
                .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let s = m.step(&x, &[0.9; 8], &[5.0; 8]);
            for k in 0..8 {
                for v in [s.i[k], s.f[k], s.o[k]] {
                    assert!(v > 0.0 && v < 1.0);
                }
                assert!(s.g[k] > -1.0 && s.g[k] < 1.0);
            }
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = synth::rng(1);
        let m = LstmModel::init(6, 5, true, &mut rng);
        let mut z = LstmModel::zeros(6, 5);
        z.residual = true;
        z.set_params(&m.params()).unwrap();
        assert_eq!(z, m);
    }

    fn random_model(
        seed: u64,
        input: usize,
        hidden: usize,
        residual: bool,
    ) -> (LstmModel, Matrix, f64) {
        let mut rng = synth::rng(seed);
        let mut m = LstmModel::init(input, hidden, residual, &mut rng);
        m.target_feature = 0;
        let p: Vec<f64> = m
            .params()
            .iter()
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        m.set_params(&p).unwrap();
        let steps = 1 + (seed as usize % 10);
        let data: Vec<f64> = (0..steps * input)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let target = rng.sample::<f64, _>(StandardNormal);
        (m, Matrix::from_vec(steps, input, data).unwrap(), target)
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for seed in 0..10 {
            let (m, seq, target) = random_model(seed, 3, 1 + seed as usize % 8, seed % 2 == 0);
            let (y, caches) = m.forward_sequence(&seq).unwrap();
            let grad = m.backward_sequence(&caches, 2.0 * (y - target));
            let mut probe = m.clone();
            let report = check_gradient(
                &m.params(),
                &grad,
                |p| {
                    probe.set_params(p)?;
                    Ok((probe.forward_sequence(&seq)?.0 - target).powi(2))
                },
                DEFAULT_STEP,
                1e-4,
                false,
            )
            .unwrap();
            assert!(report.passed(), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn predict_requires_scaler() {
        let m = LstmModel::zeros(6, 2);
        let w = WindowSample {
            history: Matrix::zeros(3, 6),
            sentiment: 0.0,
            target: vec![0.0; 6],
            target_date: chrono::NaiveDate::from_ymd_opt(2024, 1, 4).unwrap(),
            context_end: chrono::NaiveDate::from_ymd_opt(2024, 1, 3).unwrap(),
            target_index: 3,
        };
        assert!(matches!(m.predict(&w), Err(Error::Usage(_))));
    }
}
