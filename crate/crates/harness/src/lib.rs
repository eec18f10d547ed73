//! Harness library: experiment configuration, output records, and the
//! acceptance-check runner shared by the CLI and the test suite.

pub mod accept;
pub mod config;
pub mod pool;
pub mod reports;
pub mod runner;
pub mod seeds;

pub use config::{CheckOutcome, ExperimentConfig, ResultRecord};
pub use runner::run_experiment;
