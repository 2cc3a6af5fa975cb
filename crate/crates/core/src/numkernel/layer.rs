use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, where `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Logistic function, evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer `activation(W·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dimension("layer bias", weights.rows(), bias.len()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Seeded initialization: Glorot-uniform for saturating/linear units,
    /// He-normal for rectifiers. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut weights = Matrix::zeros(output, input);
        match activation {
            Activation::Relu | Activation::LeakyRelu => {
                let std = (2.0 / input.max(1) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("finite std");
                for w in weights.data_mut() {
                    *w = normal.sample(rng);
                }
            }
            _ => {
                let limit = (6.0 / (input + output).max(1) as f64).sqrt();
                let uniform = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                for w in weights.data_mut() {
                    *w = uniform.sample(rng);
                }
            }
        }
        Self {
            weights,
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// `W·x + b`
    pub fn preactivation(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::dimension(
                "dense layer input",
                self.input_size(),
                input.len(),
            ));
        }
        let mut z = self.weights.matvec(input)?;
        for (zi, bi) in z.iter_mut().zip(&self.bias) {
            *zi += bi;
        }
        Ok(z)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let z = self.preactivation(input)?;
        Ok(z.into_iter().map(|v| self.activation.apply(v)).collect())
    }
}

/// Gradient of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Per-parameter gradients of a [`Network`], laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.data_mut().iter_mut().for_each(|x| *x *= factor);
            l.bias.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Flattened in the same order as [`Network::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.data().iter().all(|&v| v == 0.0) && l.bias.iter().all(|&v| v == 0.0))
    }
}

/// Values saved by [`Network::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input seen by each layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pub preacts: Vec<Vec<f64>>,
    /// Activation of each layer; the last entry is the network output.
    pub outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map_or(&[], Vec::as_slice)
    }

    /// Pre-activation of the final layer (the logits of a sigmoid head).
    pub fn output_preactivation(&self) -> &[f64] {
        self.preacts.last().map_or(&[], Vec::as_slice)
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].input_size() != pair[0].output_size() {
                return Err(Error::dimension(
                    "stacked layer input",
                    pair[0].output_size(),
                    pair[1].input_size(),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Multi-layer perceptron with `hidden` widths.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output: usize,
        output_activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input;
        for &width in hidden {
            layers.push(DenseLayer::init(fan_in, width, hidden_activation, rng));
            fan_in = width;
        }
        layers.push(DenseLayer::init(fan_in, output, output_activation, rng));
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].output_size()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.layers[0].forward(input)?;
        for layer in &self.layers[1..] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            preacts: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let z = layer.preactivation(&x)?;
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            cache.inputs.push(x);
            cache.preacts.push(z);
            x = a.clone();
            cache.outputs.push(a);
        }
        Ok(cache)
    }

    /// Reverse-mode pass given `∂loss/∂output`. Returns parameter gradients
    /// and `∂loss/∂input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        self.check_cache(cache)?;
        let last = self.layers.len() - 1;
        if grad_output.len() != self.output_size() {
            return Err(Error::dimension(
                "output gradient",
                self.output_size(),
                grad_output.len(),
            ));
        }
        let layer = &self.layers[last];
        let delta: Vec<f64> = grad_output
            .iter()
            .zip(&cache.preacts[last])
            .zip(&cache.outputs[last])
            .map(|((g, &z), &a)| g * layer.activation.derivative(z, a))
            .collect();
        self.backward_from(cache, delta)
    }

    /// Reverse-mode pass given `∂loss/∂z` of the final layer's pre-activation.
    pub fn backward_preact(
        &self,
        cache: &ForwardCache,
        grad_preact: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        self.check_cache(cache)?;
        if grad_preact.len() != self.output_size() {
            return Err(Error::dimension(
                "output pre-activation gradient",
                self.output_size(),
                grad_preact.len(),
            ));
        }
        self.backward_from(cache, grad_preact.to_vec())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let n = self.layers.len();
        if cache.inputs.len() != n || cache.preacts.len() != n || cache.outputs.len() != n {
            return Err(Error::Usage(format!(
                "backward called with a cache of {} layers for a {}-layer network; run forward_cached first",
                cache.inputs.len(),
                n
            )));
        }
        for (layer, (x, z)) in self
            .layers
            .iter()
            .zip(cache.inputs.iter().zip(&cache.preacts))
        {
            if x.len() != layer.input_size() || z.len() != layer.output_size() {
                return Err(Error::Usage(
                    "backward called with a cache from a different network".into(),
                ));
            }
        }
        Ok(())
    }

    fn backward_from(
        &self,
        cache: &ForwardCache,
        mut delta: Vec<f64>,
    ) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let g = &mut grads.layers[idx];
            g.weights.add_outer(1.0, &delta, &cache.inputs[idx]);
            g.bias.copy_from_slice(&delta);
            let mut upstream = layer.weights.transpose_matvec(&delta)?;
            if idx > 0 {
                let prev = &self.layers[idx - 1];
                for ((u, &z), &a) in upstream
                    .iter_mut()
                    .zip(&cache.preacts[idx - 1])
                    .zip(&cache.outputs[idx - 1])
                {
                    *u *= prev.activation.derivative(z, a);
                }
                delta = upstream;
            } else {
                return Ok((grads, upstream));
            }
        }
        unreachable!("network has at least one layer")
    }

    /// All parameters, layer by layer, weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dimension(
                "parameter vector",
                self.param_count(),
                params.len(),
            ));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.data().len();
            l.weights
                .data_mut()
                .copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// One Adam update of every parameter.
    pub fn apply_adam(&mut self, adam: &mut AdamState, grads: &Gradients) -> Result<()> {
        let mut params = self.params();
        adam.step(&mut params, &grads.flatten())?;
        self.set_params(&params)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eye_layer(act: Activation) -> DenseLayer {
        DenseLayer::new(Matrix::identity(2), vec![0.0, 0.0], act).unwrap()
    }

    #[test]
    fn identity_and_relu_forward() {
        assert_eq!(
            eye_layer(Activation::Identity)
                .forward(&[3.0, -1.0])
                .unwrap(),
            vec![3.0, -1.0]
        );
        assert_eq!(
            eye_layer(Activation::Relu).forward(&[3.0, -1.0]).unwrap(),
            vec![3.0, 0.0]
        );
    }

    #[test]
    fn leaky_relu_slope() {
        let layer = DenseLayer::new(Matrix::identity(1), vec![0.0], Activation::LeakyRelu).unwrap();
        let out = layer.forward(&[-2.0]).unwrap();
        assert!((out[0] + 0.02).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_names_sizes() {
        let err = eye_layer(Activation::Identity)
            .forward(&[1.0, 2.0, 3.0])
            .unwrap_err();
        match err {
            Error::Dimension {
                expected, actual, ..
            } => assert_eq!((expected, actual), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hand_chain_rule_single_weight() {
        // loss = (w·x − y)², w = 1, x = 2, y = 0 → ∂/∂w = 2(wx − y)x = 8
        let layer = DenseLayer::new(Matrix::identity(1), vec![0.0], Activation::Identity).unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let cache = net.forward_cached(&[2.0]).unwrap();
        let dl_dout = 2.0 * (cache.output()[0] - 0.0);
        let (grads, _) = net.backward(&cache, &[dl_dout]).unwrap();
        assert_eq!(grads.layers[0].weights.data(), &[8.0]);
    }

    #[test]
    fn zero_loss_gradient_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::mlp(
            4,
            &[5, 3],
            Activation::Tanh,
            2,
            Activation::Sigmoid,
            &mut rng,
        );
        let cache = net.forward_cached(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        let (grads, gin) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(grads.is_zero());
        assert!(gin.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Network::mlp(3, &[4], Activation::Relu, 1, Activation::Identity, &mut rng);
        let b = Network::mlp(
            3,
            &[4, 4],
            Activation::Relu,
            1,
            Activation::Identity,
            &mut rng,
        );
        let cache = b.forward_cached(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(a.backward(&cache, &[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::mlp(3, &[4], Activation::Relu, 2, Activation::Tanh, &mut rng);
        let p: Vec<f64> = (0..net.param_count()).map(|i| i as f64 * 0.01).collect();
        net.set_params(&p).unwrap();
        assert_eq!(net.params(), p);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0).is_finite());
        assert!(sigmoid(800.0) <= 1.0);
    }
}
