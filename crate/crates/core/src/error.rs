use thiserror::Error;

/// Errors produced by the excursion library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("Tanimoto kernel requires binary inputs")]
    NonBinaryInput,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model fit failed: {0}")]
    Fit(String),
    #[error("linear algebra failure: {0}")]
    LinAlg(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("quadrature did not converge")]
    QuadratureDivergence,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
