//! Shared error type. Variants map onto the failure classes the CLI turns
//! into distinct exit codes: validation (dimension/contract/config/parse),
//! numeric, and I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes disagree for an operation (matmul inner dims, elementwise, ...).
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration (bad dims, K < 2, unknown key, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite values or a diverging computation.
    #[error("numeric failure at step {step}: {detail}")]
    Numeric { step: usize, detail: String },

    /// Malformed corpus / checkpoint content.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
