use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("cannot parse {}: {message}", path.display())]
    ConfigFile { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] qrlearn::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for missing inputs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::ConfigFile { .. } => 2,
            Self::Core(e) => match e {
                qrlearn::Error::Config(_) => 2,
                qrlearn::Error::FileNotFound(_) | qrlearn::Error::MissingColumn(_) => 3,
                _ => 1,
            },
            Self::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            Self::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::ConfigFile { .. } => "config-file",
            Self::Core(e) => match e {
                qrlearn::Error::Config(_) => "config",
                qrlearn::Error::FileNotFound(_) => "missing-file",
                qrlearn::Error::MissingColumn(_) => "missing-column",
                qrlearn::Error::Parse { .. } | qrlearn::Error::Csv(_) => "parse",
                _ => "runtime",
            },
            Self::Io { .. } => "io",
        }
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    exit_code: i32,
    message: String,
}

/// One JSON object on one line.
pub fn error_line(err: &CliError) -> String {
    let line = ErrorLine {
        error: err.kind(),
        exit_code: err.exit_code(),
        message: err.to_string().replace('\n', " "),
    };
    serde_json::to_string(&line).expect("plain struct serializes")
}
