use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the operation's mathematical domain.
    #[error("{what}: {reason}")]
    Domain { what: &'static str, reason: String },

    /// Configuration value rejected on load.
    #[error("config field `{field}` [{unit}]: {reason}")]
    Config {
        field: String,
        unit: &'static str,
        reason: String,
    },

    /// A least-squares fit did not produce a usable result.
    #[error("fit failed for {target}: {reason}")]
    Fit { target: String, reason: String },

    /// Drift matrix not Hurwitz, or the optical damping is not positive.
    #[error("unstable dynamics ({context}); eigenvalues: {eigenvalues:?}")]
    Instability {
        context: String,
        eigenvalues: Vec<(f64, f64)>,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    /// Envelope-corrected sideband ratio at or above one (would need n = infinity).
    #[error("unphysical sideband asymmetry: corrected ratio {corrected_ratio} >= 1 (check kappa and detuning)")]
    UnphysicalAsymmetry { corrected_ratio: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, unit: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            unit,
            reason: reason.into(),
        }
    }

    /// True for failures of the analysis itself (fit failure, instability,
    /// unphysical data) as opposed to bad input or configuration.
    pub fn is_analysis_failure(&self) -> bool {
        matches!(
            self,
            Error::Fit { .. }
                | Error::Instability { .. }
                | Error::Calibration(_)
                | Error::UnphysicalAsymmetry { .. }
        )
    }
}

/// Rejects non-positive or non-finite values.
pub(crate) fn require_positive<T: crate::Real>(what: &'static str, name: &str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, format!("{name} must be positive and finite, got {value}")))
    }
}

pub(crate) fn require_non_negative<T: crate::Real>(what: &'static str, name: &str, value: T) -> Result<()> {
    if value >= T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, format!("{name} must be non-negative and finite, got {value}")))
    }
}
