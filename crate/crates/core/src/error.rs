use thiserror::Error;

/// Errors raised by state construction, channel application and the
/// trajectory machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QrfError {
    #[error("spin quantum number must satisfy 2l >= 1, got 2l = {0}")]
    InvalidSpin(i64),

    #[error("magnetic number {k} is not one of l, l-1, ..., -l for l = {l}")]
    MagneticNumberOutOfRange { l: f64, k: f64 },

    #[error("parameter `{name}` = {value} is outside its allowed range ({allowed})")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        allowed: &'static str,
    },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("state is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("polarization r = {0} is unreachable with a finite inverse temperature")]
    UnreachablePolarization(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("outcome {outcome} has probability {probability:e}, below the conditioning threshold")]
    OutcomeImpossible { outcome: char, probability: f64 },

    #[error("frame is unpolarized (|<L>| = {0:e}); inclination is undefined")]
    UnpolarizedFrame(f64),

    #[error("state has left the X-Z plane (out-of-plane ratio {0:e})")]
    OutOfPlane(f64),

    #[error("rotation is degenerate: {0}")]
    DegenerateRotation(&'static str),

    #[error("singular formula argument: {0}")]
    Singular(&'static str),

    #[error("Choi matrix dimension cap exceeded: d = {d} > {cap}")]
    ChoiCapExceeded { d: usize, cap: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("ensemble records must be non-empty and of equal length: {0}")]
    MixedRecords(String),

    #[error("{0}")]
    Precondition(String),

    #[error("numerical invariant violated: {0}")]
    NumericalInvariant(String),
}

pub type Result<T> = std::result::Result<T, QrfError>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(QrfError::NonFinite(name))
    }
}
