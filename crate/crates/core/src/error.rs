use thiserror::Error;

/// Errors raised by the numerical engines and the run-configuration layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("dimension {0} outside supported range 1..=64")]
    DimensionTooLarge(usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("trace is not one (got {0})")]
    NonUnitTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("invalid probe parameters: {0}")]
    InvalidProbe(String),

    #[error("grid span too small: edge/max ratio {ratio:e} exceeds {limit:e}")]
    SpanTooSmall { ratio: f64, limit: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("probe function not supported for this probe representation: {0}")]
    UnsupportedFunction(String),

    #[error("pre- and post-selected states are orthogonal (|Tr ρ_f ρ_i| = {0:e})")]
    OrthogonalStates(f64),

    #[error("selection is a mixture of degenerate eigenstates of the observable; statistics are 0/0")]
    DegenerateSelection,

    #[error("post-selection probability vanishes (N = {0:e})")]
    ZeroPostselection(f64),

    #[error("moment order {order} exceeds validity order n* = {n_star}")]
    BeyondValidity { order: u32, n_star: f64 },

    #[error("grid resolution insufficient for order {order}: tail weight {tail:e}")]
    GridResolutionInsufficient { order: u32, tail: f64 },

    #[error("probe has zero <q^2>")]
    ZeroQVariance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by the input description rather than by the
    /// numerical regime of a valid input.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::NotSquare { .. }
                | Error::DimMismatch { .. }
                | Error::DimensionTooLarge(_)
                | Error::NonHermitian(_)
                | Error::NonUnitTrace(_)
                | Error::NotPositive(_)
                | Error::InvalidProbe(_)
                | Error::InvalidGrid(_)
                | Error::SpanTooSmall { .. }
                | Error::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
