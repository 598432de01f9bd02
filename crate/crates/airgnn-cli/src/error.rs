use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config key `{key}` does not apply to task {task}")]
    WrongTask { key: String, task: String },

    #[error("missing required config key `{0}`")]
    Missing(&'static str),

    #[error("invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{0}")]
    Mismatch(String),

    #[error("gradient check failed: {failures} of {checks} coefficients exceed {tolerance:e}; first offender is coefficient {index} of instance {instance}")]
    GradcheckFailed { failures: usize, checks: usize, tolerance: f64, instance: usize, index: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Lib(#[from] airgnn::Error),
}

impl CliError {
    /// 2 for validation failures, 1 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Lib(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
