use std::path::PathBuf;

use sigma_shape_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad input, 3 for failed computations, 1 for file errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Wraps a core error; input errors found only once the computation
    /// runs still count as validation failures.
    pub fn core(context: impl Into<String>) -> impl FnOnce(CoreError) -> CliError {
        let context = context.into();
        move |source| match source {
            CoreError::InvalidInput(_)
            | CoreError::RegionOutsideDomain { .. }
            | CoreError::DegenerateGeometry(_)
            | CoreError::CapacityViolation { .. }
            | CoreError::ProbeTooLarge { .. } => {
                CliError::Validation(format!("{context}: {source}"))
            }
            _ => CliError::Solver { context, source },
        }
    }
}
