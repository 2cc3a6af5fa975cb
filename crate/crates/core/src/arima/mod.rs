//! ARIMA baseline on closing prices: stationarity gate, AIC order search,
//! conditional-sum-of-squares estimation and rolling one-step forecasts.

pub mod adf;
pub mod model;
pub mod select;

pub use adf::{adf_default, adf_test, default_lag, AdfDiagnostic, AdfResult, ADF_CRITICAL_5PCT};
pub use model::{
    difference, fit, fit_conditioned, fit_with, integrate, min_root_modulus, ArimaModel,
    ArimaOrder, ArimaState, MIN_ROOT_MODULUS,
};
pub use select::{select_d, select_order, DEFAULT_P_MAX, DEFAULT_Q_MAX};
