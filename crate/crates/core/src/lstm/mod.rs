//! Single-layer LSTM baseline trained by backpropagation through time.

pub mod cell;
pub mod train;

pub use cell::{CellState, Gate, LstmModel, StepCache};
pub use train::{train, EpochLog, LstmConfig, TrainSchedule, TrainingLog};
