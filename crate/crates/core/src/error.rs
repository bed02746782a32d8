use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("the 2-vectors are linearly dependent")]
    DependentTwoVectors,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
