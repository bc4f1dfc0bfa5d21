use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("run already terminated with outcome {0}")]
    TerminatedRun(crate::ledger::Outcome),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid pattern {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },

    #[error("generation failed for snapshot {snapshot} at target {target}: {reason}")]
    Generation {
        snapshot: String,
        target: u32,
        reason: String,
    },

    #[error("backlog generation failed at target {target}: {reason}")]
    Backlog { target: u32, reason: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("record has no terminal outcome: {0}")]
    Unterminated(String),

    #[error("no common tasks between the compared conditions")]
    NoCommonTasks,

    #[error("policy adapter failed: {0}")]
    Adapter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
