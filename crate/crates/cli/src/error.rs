use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] balkwise_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// 1 for anything the user can fix by changing inputs, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        use balkwise_core::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Core(
                E::InvalidConfig(_)
                | E::OutsideParamSpace { .. }
                | E::DimensionMismatch { .. }
                | E::InvalidArgument(_)
                | E::MalformedPath(_),
            ) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
