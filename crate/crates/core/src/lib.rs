//! Daily equity forecasting with an ARIMA baseline, an LSTM baseline and a
//! sentiment-conditioned GAN, evaluated one step ahead on held-out data.

pub mod arima;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gan;
pub mod lstm;
pub mod numkernel;
pub mod sentiment;
pub mod synth;

pub use error::{Error, Result};
