use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {alpha} rad outside the model domain |alpha| < pi/4")]
    AngleDomain { alpha: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("grid resolution too coarse: {0}")]
    GridResolution(String),

    #[error("lateral shift {dx} m exceeds a quarter of the grid extent {extent} m")]
    ShiftTooLarge { dx: f64, extent: f64 },

    #[error(
        "angular-spectrum propagation over {distance} m aliases on this grid \
         (critical distance {critical} m); use at least {required_n} samples at the same pitch"
    )]
    Aliasing {
        distance: f64,
        critical: f64,
        required_n: usize,
    },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("sinusoid fit failed: {0}")]
    FitDegenerate(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("constraint structure violation: {0}")]
    StructureViolation(String),

    #[error(
        "solver did not certify a verdict after {iterations} iterations \
         (margin {margin:e}, gap bound {gap:e})"
    )]
    NonConvergence {
        iterations: usize,
        margin: f64,
        gap: f64,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
