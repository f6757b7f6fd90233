//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

/// Errors produced by construction, inversion, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state or tomogram failed physical validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// An operator was used outside its stated contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Truncation produced a block with (near-)zero trace.
    #[error("truncation to dimension {dim} leaves trace {trace:.3e}; cannot normalize")]
    DegenerateTruncation { dim: usize, trace: f64 },

    /// A reconstruction required a profile the tomogram does not contain.
    #[error("tomogram is missing the profile for probe s={s}, band l={l}")]
    Coverage { s: u32, l: u32 },

    /// A polynomial fit exceeded its residual budget.
    #[error("ill-conditioned fit ({context}): residual {residual:.3e} exceeds budget {budget:.3e}")]
    IllConditionedFit {
        context: String,
        residual: f64,
        budget: f64,
    },

    /// Sample-based estimation could not produce usable profiles.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A triangular system has a zero or near-zero diagonal entry.
    #[error("singular diagonal at row {row}")]
    SingularDiagonal { row: usize },

    /// A reconstruction coefficient system is singular.
    #[error("singular coefficient system for probe s={s}, band l={l} at row {row}")]
    SingularSystem { s: u32, l: u32, row: usize },

    /// Internal cross-checks disagreed beyond tolerance.
    #[error("internal consistency failure: {0}")]
    Inconsistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed input file contents.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code for CLI reporting.
    ///
    /// 1 i/o and format, 2 validation and contract, 3 coverage,
    /// 4 estimation and fitting, 5 singular systems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Format(_) => 1,
            Error::Domain(_)
            | Error::Validation(_)
            | Error::Contract(_)
            | Error::DegenerateTruncation { .. } => 2,
            Error::Coverage { .. } => 3,
            Error::IllConditionedFit { .. } | Error::Estimation(_) => 4,
            Error::SingularDiagonal { .. } | Error::SingularSystem { .. } => 5,
            Error::Inconsistency(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
