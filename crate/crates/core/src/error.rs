use alloc::boxed::Box;
use core::fmt;

/// Target angle identifier used in sensing diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Angle {
    Theta,
    Phi,
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Theta => f.write_str("theta"),
            Angle::Phi => f.write_str("phi"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected:?}, found {found:?})")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("Hermitian eigen-solver did not converge (residual {residual:.3e})")]
    EigenNoConvergence { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("{0} must be strictly positive (got {1})")]
    NonPositive(&'static str, f64),

    #[error("unobservable angle {0}: sensing quadratic form vanishes")]
    UnobservableAngle(Angle),

    #[error("degenerate expansion point: {0} quadratic form vanishes")]
    DegenerateExpansionPoint(Angle),

    #[error(
        "top eigenvector lies in the null space of the holographic beamformer (|W e| = {norm:.3e})"
    )]
    NullSpaceEigenvector { norm: f64 },

    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping iteration annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
