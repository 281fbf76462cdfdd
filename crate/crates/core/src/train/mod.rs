//! Sliding-window datasets, the composite loss, Adam, and the training loop.

mod adam;
mod config;
mod fit;
mod loss;
mod window;

pub use adam::AdamState;
pub use config::TrainConfig;
pub use fit::{fit, fit_with, TrainReport};
pub use loss::{response_loss, state_loss, total_loss, window_objective, LossNormalization, WindowObjective};
pub use window::{make_windows, window_count, TrajectoryWindow};
