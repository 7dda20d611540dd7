//! Experiment runner: TOML configs in, JSON and CSV artifacts out.
//!
//! Exit codes: 0 on success, 2 on a violated precondition, 3 on numerical
//! non-convergence.

pub mod config;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, SCHEMA_VERSION};
pub use error::{CliError, EXIT_NUMERICAL, EXIT_PRECONDITION};
pub use run::{execute, resolve_output_dir, Command, RunManifest, RunOutcome, OUTPUT_DIR_ENV};
