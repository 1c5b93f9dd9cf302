use std::path::PathBuf;

use chainbath::{BathError, DynamicsError, IepError, KernelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Iep(#[from] IepError),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 ok, 1 verification or runtime failure, 2 config error,
    /// 3 Lanczos breakdown, 4 non-real resolvent frequencies.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Bath(_) => 2,
            CliError::Iep(IepError::InvalidBath(_) | IepError::Dimension { .. }) => 2,
            CliError::Iep(IepError::Breakdown { .. } | IepError::ZeroCoupling) => 3,
            CliError::Dynamics(DynamicsError::MultiValued { .. }) => 4,
            CliError::Dynamics(DynamicsError::TooManySteps(_)) => 2,
            _ => 1,
        }
    }
}
