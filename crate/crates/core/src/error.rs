use std::fmt;

use crate::model::ValidationReport;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration:\n{0}")]
    Validation(ValidationReport),

    #[error("singular linear system at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("continued fraction did not converge by depth {depth}: last iterates {previous} and {last}")]
    ContinuedFractionDiverged {
        depth: usize,
        previous: Complex,
        last: Complex,
    },

    #[error("harmonic truncation did not converge by n_max = {n_max} (last change {change:e})")]
    TruncationDiverged { n_max: usize, change: f64 },

    #[error("solver failed at probe detuning {delta_p}: {source}")]
    AtDetuning {
        delta_p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("master equation did not reach a periodic steady state after {periods} periods (stroboscopic residual {residual:e})")]
    OracleNotSteady { periods: usize, residual: f64 },

    #[error("harmonic order {n} not resolvable with {samples} samples per period")]
    HarmonicOutOfRange { n: i64, samples: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_detuning(delta_p: f64, err: Error) -> Self {
        Error::AtDetuning {
            delta_p,
            source: Box::new(err),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Display wrapper so complex values print as `a+bi` inside error messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex(pub num_complex::Complex64);

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}{:+e}i", self.0.re, self.0.im)
    }
}
