//! Stage runner behind the `riskfuse` binary.

use std::fmt;

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::RunConfig;
pub use stages::{Workspace, STAGES};

#[derive(Debug)]
pub enum CliError {
    /// Configuration problems, all of them.
    Invalid(Vec<String>),
    /// A missing or stale input or upstream stage.
    Prerequisite(String),
    Core(riskfuse::Error),
}

impl From<riskfuse::Error> for CliError {
    fn from(e: riskfuse::Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(problems) => {
                writeln!(f, "invalid configuration:")?;
                for p in problems {
                    writeln!(f, "  - {p}")?;
                }
                Ok(())
            }
            CliError::Prerequisite(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// 2 for bad configuration or data, 3 for missing inputs, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Prerequisite(_) => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(riskfuse::Error::Io(_) | riskfuse::Error::Checkpoint { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}
