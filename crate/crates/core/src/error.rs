use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Validation(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("coincident detector coordinates")]
    CoincidentDetectors,
    #[error("no available labels in batch")]
    NoLabels,
    #[error("matching infeasible: {0}")]
    Infeasible(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },
    #[error("generator failed: {0}")]
    Generator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
