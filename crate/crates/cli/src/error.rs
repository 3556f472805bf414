//! CLI error type with exit-code mapping: 2 for configuration/validation
//! problems, 3 for runtime failures.

use std::fmt;

use concord_core::CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config files, or input data (exit code 2).
    Usage(String),
    /// Failures while computing or writing results (exit code 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Config(_) | CoreError::Validation(_) => CliError::Usage(err.to_string()),
            CoreError::Runtime(_) => CliError::Runtime(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Usage(format!("csv: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Runtime(format!("json: {err}"))
    }
}

impl From<toml::de::Error> for CliError {
    fn from(err: toml::de::Error) -> Self {
        CliError::Usage(format!("config: {err}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Prefixes errors with the pipeline stage that produced them.
pub trait StageContext<T> {
    fn stage(self, name: &str) -> Result<T>;
}

impl<T, E: Into<CliError>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, name: &str) -> Result<T> {
        self.map_err(|e| {
            let err = e.into();
            match err {
                CliError::Usage(m) => CliError::Usage(format!("stage {name}: {m}")),
                CliError::Runtime(m) => CliError::Runtime(format!("stage {name}: {m}")),
            }
        })
    }
}
