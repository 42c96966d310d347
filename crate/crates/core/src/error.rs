use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e} > tol {tol:.3e})")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("matrix is indefinite (eigenvalue {eigenvalue:.3e} < -{tol:.3e})")]
    Indefinite { eigenvalue: f64, tol: f64 },

    #[error("{routine} did not converge within {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("pilot matrix is rank deficient ({length} pilots for {n_tx} antennas)")]
    RankDeficientPilots { length: usize, n_tx: usize },

    #[error("numerically singular system in {0}")]
    NumericalSingularity(&'static str),

    #[error("training set is empty or too small ({found} samples, need at least {required})")]
    EmptyTrainingSet { found: usize, required: usize },

    #[error("decoder output has vanishing norm ({norm:.3e})")]
    DegenerateOutput { norm: f64 },

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },

    #[error("lookup table for {bits} bits exceeds the limit of {max_bits} bits")]
    TableTooLarge { bits: usize, max_bits: usize },

    #[error("normalized gain {ratio} exceeds the Rayleigh-quotient bound")]
    BoundViolation { ratio: f64 },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("corrupt artifact {path}: {reason}")]
    CorruptArtifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian { .. }
                | Error::Indefinite { .. }
                | Error::NoConvergence { .. }
                | Error::NumericalSingularity(_)
                | Error::DegenerateOutput { .. }
                | Error::NonFiniteLoss { .. }
                | Error::BoundViolation { .. }
        )
    }
}
