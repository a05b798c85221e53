//! Benchmark harness around `subspace_core`: CSV ingestion, TOML experiment
//! configs, the repeated split/select/test protocol, sensitivity sweeps and
//! oracle verification of single fits.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod error;
pub mod verify;

pub use error::{CliError, CliResult};
