//! Sentiment-conditioned GAN: a generator mapping a history window and its
//! sentiment to the next day's scaled bar, and a discriminator judging
//! `(candidate, window, sentiment)` triples.

mod forecast;
mod nets;
mod train;

pub use forecast::{
    forecast_holdout, forecast_windows, holdout_windows, sentiment_sensitivity, HoldoutForecast,
};
pub use nets::{
    check_scale, condition, discriminator_forward, discriminator_loss, generator_forward,
    generator_loss, point_forecast, softplus, Discriminator, Generator, GeneratorPass, NOISE_DRAWS,
    SCALE_TOLERANCE, SKIP_LIMIT,
};
pub use train::{
    adversarial_gradients, scale_window, train, train_step, AdversarialGradients, GanConfig,
    GanOptimizer, GanSchedule, LossLog, StepLoss,
};
