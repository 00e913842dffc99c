use std::path::PathBuf;

use eesim_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Stable, machine-readable failure class.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e {
                CoreError::Io(_) => "io",
                CoreError::Parse { .. }
                | CoreError::UnsupportedVersion { .. }
                | CoreError::Json(_) => "parse",
                CoreError::NonFiniteLoss { .. } => "training",
                CoreError::Uninitialized
                | CoreError::Frozen
                | CoreError::NotFrozen
                | CoreError::EmptyHistogram
                | CoreError::SourceExhausted { .. } => "state",
                CoreError::InvalidTrace(_)
                | CoreError::InvalidThreshold(_)
                | CoreError::UnknownArm(_)
                | CoreError::InvalidParams(_)
                | CoreError::DimensionMismatch(_) => "invalid-input",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "parse" => 4,
            _ => 1,
        }
    }

    /// `error[category]: message` on a single line.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.category(), msg)
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
