//! Next-step exchange-rate forecasting with three hand-differentiated
//! networks: a simple recurrent network, an LSTM and a feedforward
//! backpropagation network.
//!
//! The crate covers the whole path from raw close prices to error tables:
//!
//! - [`dataio`]: CSV ingestion, resampling, descriptive statistics, splits
//! - [`pipeline`]: min-max scaling and sliding windows
//! - [`models`]: parameters, initialization and forward passes
//! - [`train`]: backpropagation, BPTT, dropout, gradient checking, the training loop
//! - [`evalkit`]: MAE / RMSE / MAPE and the comparison table

pub mod dataio;
pub mod error;
pub mod evalkit;
pub mod models;
pub mod numkit;
pub mod pipeline;
pub mod train;

pub use error::{FxError, Result};
