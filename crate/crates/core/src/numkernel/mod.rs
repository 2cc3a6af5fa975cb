//! Dense-network numerical core: matrices, layers, reverse-mode gradients,
//! Adam, min-max scalers and finite-difference checks.

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod matrix;
pub mod scaler;

pub use adam::AdamState;
pub use gradcheck::{check_gradient, finite_difference_check, GradCheckReport};
pub use layer::{sigmoid, Activation, DenseLayer, ForwardCache, Gradients, Network};
pub use matrix::Matrix;
pub use scaler::{ScaleMode, ScalerParams};

use crate::error::Result;

/// `activation(W·x + b)` for a single layer.
pub fn dense_forward(layer: &DenseLayer, input: &[f64]) -> Result<Vec<f64>> {
    layer.forward(input)
}
