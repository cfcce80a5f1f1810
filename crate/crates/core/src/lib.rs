//! Multivariate time-series forecasting with a multi-scale residual
//! convolution block feeding an LSTM (MRC-LSTM).
//!
//! Everything numerical is implemented here with explicit backward passes:
//!
//! - [`tensor`]: dense `f64` tensors and the seeded [`Prng`].
//! - [`nn`]: convolution, dense, LSTM, activations, concatenation and a
//!   finite-difference gradient checker.
//! - [`model`]: the multi-scale residual block, the full MRC-LSTM network and
//!   the MLP / CNN / LSTM / CNN-LSTM baselines.
//! - [`train`]: MSE loss, Adam, the piecewise learning-rate schedule, the
//!   mini-batch loop and JSON checkpoints.
//! - [`data`]: CSV ingestion, forward fill, min-max scaling, windowing and
//!   chronological splits.
//! - [`metrics`]: MAE, RMSE, MAPE and R² on the original price scale.
//! - [`cli`]: the `train` / `eval` / `predict` / `gradcheck` / `compare`
//!   commands behind the `mrc-lstm` binary.
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod checks;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Prng, Tensor};
