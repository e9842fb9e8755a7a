use qrf_core::QrfError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical-invariant",
            CliError::Io(_) => "io",
        }
    }

    /// `qrf-sim: <kind>: <reason>` on a single line.
    pub fn diagnostic(&self) -> String {
        let reason = self.to_string().replace(['\n', '\r'], " ");
        format!("qrf-sim: {}: {}", self.kind(), reason.trim())
    }
}

/// Physics-library errors raised while a run is in progress. State-health
/// failures are numerical; everything else traces back to a parameter.
impl From<QrfError> for CliError {
    fn from(e: QrfError) -> Self {
        match e {
            QrfError::NumericalInvariant(_) | QrfError::NotPositive { .. } | QrfError::InvalidDensityMatrix(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
