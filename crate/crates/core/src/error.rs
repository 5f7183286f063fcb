// SPDX-License-Identifier: Apache-2.0
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented invariant (architecture, netlist, request).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}:{column}: syntax error: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// The netlist does not fit on the architecture.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("unroutable: {0}")]
    Unroutable(String),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    /// An internal consistency check failed; indicates corrupted input data.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
