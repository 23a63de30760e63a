use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cap violation: {0}")]
    Cap(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(qeopt::Error),
    #[error("{0}")]
    Other(String),
}

impl From<qeopt::Error> for HarnessError {
    fn from(e: qeopt::Error) -> Self {
        match e {
            qeopt::Error::Unsupported(m) => Self::Cap(m),
            qeopt::Error::InsufficientData(m) => Self::InsufficientData(m),
            other => Self::Core(other),
        }
    }
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Schema(_) => 2,
            Self::Cap(_) => 3,
            Self::InsufficientData(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
