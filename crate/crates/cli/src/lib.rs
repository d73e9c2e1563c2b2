//! Experiment runner behind the `gmclab` binary: config validation, execution, run
//! directories with manifests, CSV tables, SVG plots and verdicts, and replay.

pub mod config;
pub mod output;
pub mod plan;
pub mod run;
pub mod svg;

pub use config::{Experiment, RunConfig};
pub use output::{replay, run, write_run, Manifest, ReplayMode, ReplayReport, RunSummary};
pub use plan::{validate, Plan};
pub use run::{execute, RunOutput, Verdict};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GMCLAB_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A violated precondition, caught before any sampling.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<gmc_core::Error> for CliError {
    fn from(e: gmc_core::Error) -> Self {
        use gmc_core::Error as E;
        match e {
            E::Numeric(_) | E::Factorization { .. } => CliError::Numeric(e.to_string()),
            E::Io(io) => CliError::Io(io),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {e}"))
    }
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w| w > 0)
}
