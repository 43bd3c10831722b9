use std::io;

use thiserror::Error;

/// Errors produced by the mixture-detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two pooled observations share a value; rank statistics need a strict order.
    #[error("tied value {value} appears more than once in the pooled sample")]
    Ties { value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("problem too large for exact enumeration: {0}")]
    Scale(String),

    #[error("maximizer at bracket edge ({0}); widen the search bracket")]
    Bracket(String),

    #[error("null table format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
