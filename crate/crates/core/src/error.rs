use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped so the CLI can map them onto exit codes: malformed or
/// inconsistent inputs are data errors, misuse of an API or config is a usage
/// error, and numerical failures during fitting are training errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid bar on {date}: {field} {message}")]
    Invariant {
        date: String,
        field: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },

    #[error("training diverged at {stage} {index}: {message}")]
    Training {
        stage: &'static str,
        index: usize,
        message: String,
    },

    #[error(
        "optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})"
    )]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("fetch failed{}: {message}", status.map(|s| format!(" with HTTP {s}")).unwrap_or_default())]
    Fetch {
        status: Option<u16>,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Process exit code: 2 data, 64 usage, 70 internal/training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Invariant { .. }
            | Error::Data(_)
            | Error::Insufficient(_)
            | Error::Csv(_)
            | Error::Fetch { .. } => 2,
            Error::Usage(_) | Error::Config(_) => 64,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 70,
        }
    }

    /// Prefixes the message with `ctx` (an asset, a file) while keeping the
    /// variant and so the exit code.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        let pre = |m: String| format!("{ctx}: {m}");
        match self {
            Error::Usage(m) => Error::Usage(pre(m)),
            Error::Parse { line, message } => Error::Parse {
                line,
                message: pre(message),
            },
            Error::Invariant {
                date,
                field,
                message,
            } => Error::Invariant {
                date: format!("{ctx}: {date}"),
                field,
                message,
            },
            Error::Data(m) => Error::Data(pre(m)),
            Error::Insufficient(m) => Error::Insufficient(pre(m)),
            Error::Training {
                stage,
                index,
                message,
            } => Error::Training {
                stage,
                index,
                message: pre(message),
            },
            Error::Fetch { status, message } => Error::Fetch {
                status,
                message: pre(message),
            },
            Error::Config(m) => Error::Config(pre(m)),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), pre(e.to_string()))),
            Error::Csv(e) => Error::Data(pre(e.to_string())),
            other => {
                log::error!("{ctx}: {other}");
                other
            }
        }
    }
}
