use serde::Serialize;
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown reproduction target `{0}`")]
    UnknownTarget(String),

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: mvtorus::Error,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<mvtorus::Error> for CliError {
    fn from(e: mvtorus::Error) -> Self {
        match e {
            mvtorus::Error::Io(msg) => CliError::Io(msg),
            other => CliError::Numerical {
                context: "computation failed".into(),
                source: other,
            },
        }
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::UnknownTarget(_) => "unknown_target",
            CliError::Numerical { .. } => "numerical",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::UnknownTarget(_) => 2,
            _ => 1,
        }
    }

    pub fn record(&self, command: &str) -> ErrorRecord {
        ErrorRecord {
            command: command.to_owned(),
            kind: self.kind(),
            message: self.to_string(),
        }
    }
}

/// Machine-readable failure report (error.json).
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub command: String,
    pub kind: &'static str,
    pub message: String,
}

pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for mvtorus::Result<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T> {
        self.map_err(|e| match e {
            mvtorus::Error::Io(msg) => CliError::Io(msg),
            source => CliError::Numerical {
                context: what.into(),
                source,
            },
        })
    }
}
