use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(fedns_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Output { .. } => 1,
        }
    }

    /// Classifies a failure while loading or preparing data.
    pub fn data(err: fedns_core::Error) -> Self {
        CliError::Data(err.to_string())
    }

    /// Classifies a failure while running an algorithm.
    pub fn run(err: fedns_core::Error) -> Self {
        use fedns_core::Error as E;
        if err.is_numerical() {
            return CliError::Numerical(err);
        }
        match err {
            E::InvalidArgument(_) | E::UnknownSketchKind(_) | E::TooManyWorkers { .. } => {
                CliError::Config(err.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}
