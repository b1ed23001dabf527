//! Experiment harness for CVaR bandit algorithms: configuration,
//! replication running, deterministic parallel orchestration and CSV
//! reporting. The `cvar-bandits` binary is a thin wrapper over this
//! library.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig};
pub use report::ExperimentReport;
pub use runner::run_experiment;

use thiserror::Error;

/// Harness-level errors, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Configuration could not be read, parsed or validated (exit 2).
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// A sequential trace arm ran out of samples (exit 3).
    #[error("{0}")]
    TraceExhausted(cvar_bandits_core::env::EnvError),
    /// The KL-projection solver failed to converge (exit 4).
    #[error("{0}")]
    Solver(#[from] cvar_bandits_core::kinf::KinfError),
    /// Output files could not be written (exit 2).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<cvar_bandits_core::env::EnvError> for HarnessError {
    fn from(err: cvar_bandits_core::env::EnvError) -> Self {
        match err {
            cvar_bandits_core::env::EnvError::TraceExhausted { .. } => {
                HarnessError::TraceExhausted(err)
            }
            other => HarnessError::Config(ConfigError::Environment(other)),
        }
    }
}

impl HarnessError {
    /// Process exit code for this error: 2 config, 3 trace exhaustion,
    /// 4 solver non-convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::TraceExhausted(_) => 3,
            HarnessError::Solver(_) => 4,
        }
    }
}
