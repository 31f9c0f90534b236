use crate::linsolve::SolveReport;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("singular system (zero or non-finite pivot at row {row})")]
    Singular { row: usize },

    #[error("Newton iteration failed: {reason} after {} iterations (residual {:.3e})", report.iterations, report.final_residual)]
    NonConvergence { reason: String, report: SolveReport },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. } | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
