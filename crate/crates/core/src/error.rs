use thiserror::Error;

use crate::ed::ConvergenceReport;

pub type Result<T> = std::result::Result<T, QrmError>;

#[derive(Debug, Error)]
pub enum QrmError {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("ground state did not converge below the cutoff limit {limit} (last cutoff {})", report.final_cutoff)]
    NonConvergence {
        limit: usize,
        report: ConvergenceReport,
    },

    #[error("finite-difference step too large: neighbouring states overlap only {overlap:.3e}")]
    StepTooLarge { overlap: f64 },

    #[error("optimizer did not converge after {iterations} iterations (best energy {best_energy})")]
    OptimizerNonConvergence { iterations: usize, best_energy: f64 },

    #[error("sweep point {index}: {source}")]
    AtGridIndex {
        index: usize,
        #[source]
        source: Box<QrmError>,
    },

    #[error("parameter derivatives invalid at sweep index {index}: {reason}")]
    DerivativeInvalid { index: usize, reason: String },

    #[error("normalization violated by {0:.3e}")]
    NotNormalized(f64),

    #[error("closed form failed its defining equation (relative residual {0:.3e})")]
    NumericalBranch(f64),

    #[error("no sign change of {0} in the supplied range")]
    NoSignChange(&'static str),

    #[error("design matrix is rank deficient (need {needed} independent columns, got {got} rows)")]
    RankDeficient { needed: usize, got: usize },

    #[error("unknown variant `{0}`")]
    UnknownVariant(String),

    #[error("record schema version {found} is not supported (expected {expected}); migration needed")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("parse error at byte offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("refusing to store non-finite value in column `{0}`")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QrmError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QrmError::Domain(msg.into())
    }

    pub(crate) fn at_index(index: usize, source: QrmError) -> Self {
        QrmError::AtGridIndex {
            index,
            source: Box::new(source),
        }
    }
}
