//! Experiment configuration, orchestration, the grid-optimum oracle, and
//! CSV/JSON reporting used by the command-line harness.

pub mod config;
pub mod oracle;
pub mod report;
pub mod runner;

pub use config::{AlgorithmId, ConfigError, EnvConfig, ExperimentConfig};
pub use oracle::{grid_optimum, oracle_gain};
pub use report::{regret_slope, ResultRow, Summary, CSV_HEADER};
pub use runner::{run_experiment, ExperimentArtifacts, HarnessError};
