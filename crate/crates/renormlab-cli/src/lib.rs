//! Batch driver for the renormlab pipelines: configuration, artifact
//! persistence and plot tables.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod store;

pub use config::RunConfig;
pub use error::{CliError, Result};
