use std::process::ExitCode;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config values (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Missing, unreadable or inconsistent input files (exit 2).
    #[error("{0}")]
    Data(String),
    /// Divergence, singular fits, or failed acceptance thresholds (exit 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn data(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

impl From<dpmhp_core::Error> for CliError {
    fn from(e: dpmhp_core::Error) -> Self {
        use dpmhp_core::Error as E;
        match e {
            E::Diverged { .. } | E::NonFinite { .. } | E::NotPositiveDefinite | E::NotNormalizable | E::ZeroVariance { .. } => {
                CliError::Numerical(e.to_string())
            }
            E::DimensionMismatch { .. } | E::Empty(_) | E::NonFiniteInput(_) | E::TooFewSamples { .. } => {
                CliError::Data(e.to_string())
            }
            E::InvalidDelta(_) | E::EmptyHypotheses | E::InvalidParameter(_) => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
