use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Solver(#[from] nrsync_core::Error),

    #[error("{failed} of {total} points failed (rerun with --keep-going to accept partial results)")]
    PartialFailure { failed: usize, total: usize },
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// 2 for bad input, 1 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(_) | CliError::Config { .. } => 2,
            CliError::Solver(nrsync_core::Error::InvalidParameter { .. } | nrsync_core::Error::Unphysical { .. }) => 2,
            CliError::Solver(_) | CliError::PartialFailure { .. } => 1,
        }
    }
}
