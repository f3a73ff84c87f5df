use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the workbench, grouped so that each group maps onto one
/// process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("field mismatch: {0}")]
    Mismatch(String),

    #[error(
        "metric is not positive definite at node {node} (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveDefinite { node: usize, min_eigenvalue: f64 },

    #[error("normal field check failed at node {node}: {reason}")]
    BadNormal { node: usize, reason: String },

    #[error("angle hypothesis violated: max angle {max_angle} >= pi/4 (ratio {max_ratio} >= 2)")]
    AngleViolated { max_angle: f64, max_ratio: f64 },

    #[error("operator is not elliptic: margin {margin:e}")]
    NotElliptic { margin: f64 },

    #[error("forcing: {0}")]
    Forcing(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("certificate refused: {0}")]
    Certificate(String),

    #[error("{0}")]
    Numerical(String),

    #[error("config {path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error.
    ///
    /// 2 is reserved for violations of the geometric hypotheses, 3 for
    /// numerical failures, 4 for configuration errors and 5 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AngleViolated { .. } | Error::NotElliptic { .. } => 2,
            Error::Config { .. } | Error::Domain(_) => 4,
            Error::Io { .. } => 5,
            _ => 3,
        }
    }

    pub fn is_hypothesis_violation(&self) -> bool {
        self.exit_code() == 2
    }
}
