use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Evaluation point closer than the filament guard distance to a wire.
    #[error("field singularity: point within {distance:.3e} m of segment {segment}")]
    Singularity { segment: usize, distance: f64 },

    #[error("ensemble setup failed: {0}")]
    Setup(String),

    /// The transverse Hessian at a minimum is not positive definite, e.g. a
    /// quadrupole guide without an axial field.
    #[error("degenerate trap: {0}")]
    DegenerateTrap(String),

    #[error("eigensolver did not converge: {message} (worst residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("layout parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("circuit validation failed: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
