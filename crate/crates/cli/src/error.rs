use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(idma_core::Error),
    #[error("{0}")]
    Numeric(String),
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl CliError {
    /// 0 success, 1 numeric failure, 2 usage or configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numeric(_) => 1,
            Self::Usage(_) | Self::Config(_) | Self::Io { .. } => 2,
        }
    }
}

impl From<idma_core::Error> for CliError {
    fn from(e: idma_core::Error) -> Self {
        use idma_core::Error as E;
        match e {
            E::Config { .. }
            | E::InvalidPath { .. }
            | E::InvalidUser { .. }
            | E::InvalidPermutation { .. }
            | E::Shape(_)
            | E::Template { .. }
            | E::Profile(_) => Self::Config(e),
            other => Self::Numeric(other.to_string()),
        }
    }
}

impl From<idma_sim::SimError> for CliError {
    fn from(e: idma_sim::SimError) -> Self {
        match e {
            idma_sim::SimError::Core(c) => c.into(),
            idma_sim::SimError::Shape(m) | idma_sim::SimError::Unsupported(m) => Self::Usage(m),
            other => Self::Numeric(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
