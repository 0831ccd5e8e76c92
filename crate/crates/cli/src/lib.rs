//! Configurable experiments over `dppc-core`, driven by the `dppc` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod report;
pub mod schema;

pub use config::{ExperimentConfig, KernelSpec, Verb};
pub use error::{CliError, Result};
pub use report::Report;

/// Parses, validates and runs a config, returning the report unwritten.
pub fn run_config(value: &serde_json::Value) -> Result<Report> {
    let cfg = ExperimentConfig::from_json(value)?;
    experiments::run(&cfg)
}
