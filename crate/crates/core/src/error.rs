use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Parse,
    Topology,
    Geometry,
    Config,
    Compatibility,
    Convergence,
    Numerical,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Topology => "topology",
            ErrorCategory::Geometry => "geometry",
            ErrorCategory::Config => "config",
            ErrorCategory::Compatibility => "compatibility",
            ErrorCategory::Convergence => "convergence",
            ErrorCategory::Numerical => "numerical",
        }
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_input_error(self) -> bool {
        !matches!(self, ErrorCategory::Convergence | ErrorCategory::Numerical)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Topology(String),

    #[error("{0}")]
    Geometry(String),

    #[error("{0}")]
    Config(String),

    #[error(
        "compatibility condition violated: net charge minus outward boundary flux = {residual:.6e} \
         (allowed {tolerance:.3e})"
    )]
    Compatibility { residual: f64, tolerance: f64 },

    #[error("GMRES stopped after {iterations} iterations with relative residual {relative_residual:.3e}")]
    Convergence { iterations: usize, relative_residual: f64 },

    #[error("GMRES breakdown at iteration {iteration}: Krylov space is invariant but residual is {relative_residual:.3e}")]
    Breakdown { iteration: usize, relative_residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension { context: &'static str, expected: usize, got: usize },

    #[error("point ({x}, {y}) lies outside the mesh")]
    OutsideMesh { x: f64, y: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io(_) => ErrorCategory::Io,
            Error::Parse { .. } => ErrorCategory::Parse,
            Error::Topology(_) => ErrorCategory::Topology,
            Error::Geometry(_) | Error::OutsideMesh { .. } => ErrorCategory::Geometry,
            Error::Config(_) => ErrorCategory::Config,
            Error::Compatibility { .. } => ErrorCategory::Compatibility,
            Error::Convergence { .. } => ErrorCategory::Convergence,
            Error::Breakdown { .. }
            | Error::NonFinite(_)
            | Error::Dimension { .. }
            | Error::Degenerate(_) => ErrorCategory::Numerical,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
