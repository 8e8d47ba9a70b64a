use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("generators are not closed under the bracket (residual {residual:.3e})")]
    NotClosedUnderBracket { residual: f64 },

    #[error("subalgebra is not contained in the ambient subalgebra (residual {residual:.3e})")]
    SubalgebraNotContained { residual: f64 },

    #[error("restricted symplectic form on the slice is degenerate (|det| = {det:.3e})")]
    DegenerateSliceForm { det: f64 },

    #[error("Witt-Artin dimension identity violated: {0}")]
    WittArtinDimensions(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("point is not a relative equilibrium (velocity residual {residual:.3e})")]
    NotRelativeEquilibrium { residual: f64 },

    #[error("implicit midpoint solve did not converge (residual {residual:.3e})")]
    SolverDiverged { residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed [{check}]: {detail}")]
    Validation { check: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
