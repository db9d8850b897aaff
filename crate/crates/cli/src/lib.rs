//! Experiment runner for the lstmcs toolkit: configuration, dataset
//! ingestion (synthetic ensembles, IDX digits, PGM images), the `train`,
//! `solve`, `sweep`, `timing` and `gen-data` commands, and CSV emission.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod idx;
pub mod output;
pub mod pgm;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
