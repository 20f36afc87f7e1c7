use thiserror::Error;

/// Errors reported by the physics kernels.
///
/// `InvalidInput` marks caller mistakes (bad parameters, inconsistent
/// array lengths); `Numerical` marks runtime failures of an otherwise
/// well-posed computation (no convergence, singular systems, divergent
/// integrals).
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }
}
