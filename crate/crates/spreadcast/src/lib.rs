//! Batch front end for the forecasting core: CSV ingestion, model files,
//! per-region pipeline, reports and the `spreadcast` command.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod modelfile;
pub mod output;
pub mod pipeline;

pub use error::{Error, Result};
