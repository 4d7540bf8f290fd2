use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One violated scenario condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Stable short name of the condition, e.g. `"net radius range"`.
    pub condition: String,
    pub detail: String,
}

impl Violation {
    pub fn new(condition: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation { condition: condition.into(), detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point lies inside the envelope contour (E = {distance:.6e} < level {level})")]
    InsideContour { distance: f64, level: f64 },

    #[error("contour projection did not converge (residual {residual:.3e})")]
    ProjectionFailed { residual: f64 },

    #[error("non-finite state at t = {time}: {what}")]
    NonFiniteState { time: f64, what: String },

    #[error("scenario validation failed: {}", list(.0))]
    Validation(Vec<Violation>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

fn list(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Names of the violated conditions for a validation error.
    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::Validation(v) => v,
            _ => &[],
        }
    }
}
