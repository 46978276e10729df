//! Experiment runner: configuration, the suite registry and result envelopes.

pub mod config;
pub mod runner;
pub mod suites;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{list, run, RunOptions};
pub use suites::{run_suite, SuiteOutcome, SUITES};
