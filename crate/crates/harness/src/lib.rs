//! Experiment harness behind the `batt` command: configuration, multi-trial
//! runs, CSV output and the oracle verification suite.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod suite;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{ConfigError, HarnessError, Result};
