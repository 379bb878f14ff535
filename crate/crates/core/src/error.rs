use thiserror::Error;

/// Errors raised by geometry, flow and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (lambda >= 1, theta out of
    /// range, c out of range, ...). Usually a bad input, not a runtime fault.
    #[error("domain error: {0}")]
    Domain(String),

    /// |r| or |u| exceeds the supported radius window; hyperbolic factors
    /// would overflow derived quantities.
    #[error("radius overflow: |{0}| exceeds {1}")]
    Overflow(f64, f64),

    /// The induced graph metric lost positive definiteness. Analytically
    /// impossible; guards discretization bugs.
    #[error("singular induced metric at node ({0}, {1})")]
    SingularMetric(usize, usize),

    /// An admissible interval came out empty; the string names the binding
    /// endpoint.
    #[error("empty admissible interval: {0}")]
    EmptyInterval(String),

    /// Config file problem, with a 1-based line number where applicable.
    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }

    pub fn missing_key(key: &str) -> Self {
        Error::Config {
            line: 0,
            msg: format!("missing key {key}"),
        }
    }

    /// Process exit code: 2 for usage/config problems, 3 for numerical faults.
    /// Monitor failures are reported by the harness as exit 1, not as errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Domain(_) | Error::EmptyInterval(_) | Error::Io(_) => 2,
            Error::Overflow(..) | Error::SingularMetric(..) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
