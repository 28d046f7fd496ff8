//! Command-line orchestration for PCA-Net change detection: model files,
//! training and detection pipelines, and the benchmark sweep.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{CliError, Result};
