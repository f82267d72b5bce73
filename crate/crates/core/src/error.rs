use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One problem found while validating a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: missing required field `{field}`")]
    MissingField {
        path: String,
        line: usize,
        field: &'static str,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("logical form `{0}` has no reference utterance")]
    MissingReference(String),

    #[error("feature configuration does not match model: {0}")]
    ModelMismatch(String),

    #[error("configuration has {} error(s):\n{}", .0.len(), join_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("generator error: {0}")]
    Generator(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("scorer protocol violation: {0}")]
    Protocol(String),

    #[error("scorer timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 external service.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Generator(_) | Error::Transport(_) | Error::Protocol(_) | Error::Timeout(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::io("i/o", source)
    }
}
