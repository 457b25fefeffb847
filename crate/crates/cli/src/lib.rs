//! Command implementations behind the `lqexplain` binary.
//!
//! Every command is a plain function returning `Result<_, CliError>`; the
//! binary maps errors to exit codes with [`CliError::exit_code`]:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | `validate` found a failing check |
//! | 2 | input or configuration error (unreadable, malformed or inconsistent files, bad flags) |
//! | 3 | simulation diverged while generating data |
//! | 4 | the inverse problem did not converge |

pub mod cases;
pub mod commands;
pub mod pipeline;
pub mod report;
pub mod validate;

use lqexplain::data_io::DataError;
use lqexplain::ioc::IocError;
use lqexplain::systems::SystemError;
use thiserror::Error;

pub use cases::{Case, DEFAULT_SEED};
pub use report::{Baselines, ComparisonRmse, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Data(DataError),
    #[error("simulation failed: {0}")]
    Divergence(DataError),
    #[error("system identification failed: {0}")]
    Identification(SystemError),
    #[error("inverse problem failed: {0}")]
    Ioc(IocError),
    #[error("inverse problem did not converge: {0}")]
    NonConvergence(String),
    #[error("validation failed: {}", failed.join(", "))]
    ValidationFailed { failed: Vec<String> },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed { .. } => 1,
            CliError::Input(_) | CliError::Data(_) | CliError::Identification(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Ioc(e) => match e {
                IocError::AllRestartsDiverged { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Simulation { .. } => CliError::Divergence(e),
            other => CliError::Data(other),
        }
    }
}

impl From<IocError> for CliError {
    fn from(e: IocError) -> Self {
        CliError::Ioc(e)
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(DataError::Config("x".into())).exit_code(), 2);
        let sim = DataError::Simulation {
            trajectory: 1,
            source: SystemError::Divergence { step: 3 },
        };
        assert_eq!(CliError::from(sim).exit_code(), 3);
        assert_eq!(
            CliError::from(IocError::AllRestartsDiverged { restarts: 2 }).exit_code(),
            4
        );
        assert_eq!(CliError::from(IocError::EmptyDataset).exit_code(), 2);
        assert_eq!(CliError::NonConvergence("x".into()).exit_code(), 4);
        assert_eq!(
            CliError::ValidationFailed {
                failed: vec!["a".into()]
            }
            .exit_code(),
            1
        );
    }
}
