//! Batch driver for periodic robust LMPC experiments: configuration,
//! the learning loop, persisted artifacts and their verification.

pub mod config;
pub mod experiment;
pub mod manifest;
pub mod report;
pub mod verify;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, Experiment, IterationMetrics, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] plmpc_core::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: String, message: String },
}

impl RunError {
    /// Process exit code: 1 for usage problems, 2 for failed invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Io { .. } => 1,
            RunError::Core(_) | RunError::Invariant(_) | RunError::Artifact { .. } => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
        let context = context.into();
        move |source| RunError::Io { context, source }
    }
}
