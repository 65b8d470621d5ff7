use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the sampling stack.
///
/// Variants fall in two families: caller mistakes (`Usage`) and problems with
/// the data itself (`Parse`, `ZeroSupport`, `Io`). The CLI maps the first to
/// exit code 1 and the rest to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("conditioning event has zero probability")]
    ZeroSupport,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}
