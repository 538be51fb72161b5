//! Scenario runner: configs, ledger output and the built-in check suites.

pub mod config;
pub mod criteria;
pub mod report;
pub mod run;
pub mod scenarios;

use thiserror::Error;

pub use config::ScenarioConfig;
pub use criteria::{run_suite, CriterionResult, Scale, Suite};
pub use report::{Invariant, RunReport};
pub use run::{run_scenario, RunOutput};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) => 3,
        }
    }
}

impl From<crate::metrics::MetricsError> for RunError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        match e {
            crate::metrics::MetricsError::Config(m) => RunError::Config(m),
            other => RunError::Numerical(other.to_string()),
        }
    }
}
