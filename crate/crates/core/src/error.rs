//! Error types shared across the solver.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChdError {
    /// Invalid configuration or invalid input data (bad parameter ranges,
    /// initial data outside the simplex, malformed files, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A structural hypothesis of the model is violated: the admissible
    /// region is not contained in the open simplex, or the inward-pointing
    /// drift condition fails on its boundary.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// A numerical subsystem failed (solver non-convergence, NaN detected,
    /// CFL guard tripped, proximal Newton breakdown).
    #[error("numerical failure in {subsystem}: {message}")]
    Numerical { subsystem: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ChdError {
    pub fn config(msg: impl Into<String>) -> Self {
        ChdError::Config(msg.into())
    }

    pub fn hypothesis(msg: impl Into<String>) -> Self {
        ChdError::Hypothesis(msg.into())
    }

    pub fn numerical(subsystem: impl Into<String>, message: impl Into<String>) -> Self {
        ChdError::Numerical {
            subsystem: subsystem.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ChdError>;
