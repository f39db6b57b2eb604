//! Forecasting core for cumulative epidemic case counts.
//!
//! Three per-region models share one data contract: a stacked LSTM
//! ([`dspm`]), a piecewise-logistic additive regression ([`nrm`]) and an
//! epsilon-insensitive support vector regression baseline ([`svr`]).
//! [`evaluation`] turns held-out forecasts into MAE and error-rate reports.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod dspm;
pub mod error;
pub mod evaluation;
pub mod nrm;
pub mod numerics;
pub mod svr;

pub use error::{Error, ErrorKind, Result};
