use thiserror::Error;

/// Errors raised by the physics modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("half-maximum crossing not bracketed: {0}")]
    NotBracketed(String),

    #[error("walk-off calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("gain-curve fit did not converge after {iterations} iterations (residual {residual:e})")]
    FitFailed { iterations: usize, residual: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("spectral grid does not resolve the delay: {0}")]
    GridResolution(String),

    #[error("Fock truncation inadequate: {0}")]
    Truncation(String),

    #[error("lattice too coarse: {0}")]
    LatticeResolution(String),
}

impl HomError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        HomError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HomError::InvalidParameter { .. }
                | HomError::DegenerateData(_)
                | HomError::GridResolution(_)
                | HomError::LatticeResolution(_)
                | HomError::Truncation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, HomError>;
