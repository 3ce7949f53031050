//! Batch experiment runner over the model-space verifiers: parse a config,
//! execute a named suite with seeded determinism, and emit machine-readable
//! reports with replayable violation witnesses.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod suites;

pub use config::{ExperimentConfig, SuiteName, SuiteParams};
pub use error::{CliError, Result};
pub use report::{CheckResult, ExperimentReport, Verdict};
pub use runner::{replay, run, ReplayOutcome, ReplayReport};
