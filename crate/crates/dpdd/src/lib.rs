//! Forecasting time series of probability distributions.
//!
//! The pipeline estimates a stationary density by KDE, builds importance-weighted
//! EDMD moment matrices over a function dictionary, extracts the leading Koopman
//! eigenpairs, and forecasts future densities by propagating modal coefficients
//! in closed form. A quantile-space autoregressive baseline (`war`), exact
//! Wasserstein-2 metrics (`transport`), a sliding-window variant for locally
//! stationary panels (`sliding`), simulation benchmarks (`sim`) and a housing
//! panel experiment (`housing`) round out the toolkit.
//!
//! Start with the runnable programs under `examples/`; each one exercises a
//! major capability end to end.

pub mod basis;
pub mod cli;
pub mod density;
mod error;
pub mod forecast;
pub mod housing;
pub mod koopman;
pub mod sim;
pub mod sliding;
pub mod transport;
mod types;
pub mod war;

pub use error::{DpddError, Result};
pub use types::{LinkedPanel, Points};
