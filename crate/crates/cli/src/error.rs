use carma_core::CarmaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(CarmaError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<CarmaError> for CliError {
    fn from(e: CarmaError) -> Self {
        match e {
            CarmaError::InvalidOrders { .. }
            | CarmaError::InvalidParameter(_)
            | CarmaError::NotConjugateClosed
            | CarmaError::InvalidModel(_)
            | CarmaError::DistinctRootsRequired
            | CarmaError::NotInvertible
            | CarmaError::DimensionMismatch(_)
            | CarmaError::InsufficientData(_)
            | CarmaError::Unsupported(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
