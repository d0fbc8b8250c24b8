use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported Sobol dimension {requested} (table holds {max})")]
    UnsupportedDimension { requested: usize, max: usize },
    #[error("contract violation: {0}")]
    Contract(&'static str),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("surrogate fitted as {fitted}, {requested} prediction requested")]
    Mode {
        fitted: &'static str,
        requested: &'static str,
    },
    #[error("surrogate required by strategy {0} is missing")]
    MissingSurrogate(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
