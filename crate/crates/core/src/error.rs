use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid entity: {0}")]
    InvalidEntity(String),

    #[error("invalid task {task_id}: {reason}")]
    InvalidTask { task_id: String, reason: String },

    #[error("invalid corpus {corpus_ref}: {reason}")]
    InvalidCorpus { corpus_ref: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("untransferable question {question:?}: topic {topic:?} does not occur in it")]
    Untransferable { question: String, topic: String },

    #[error("backend transport error: {0}")]
    Transport(String),

    #[error("backend protocol error: {0}")]
    Protocol(String),

    #[error("invalid infill plan: {0}")]
    InvalidPlan(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate task id {0:?}")]
    DuplicateTask(String),

    #[error("no reference text for task(s): {}", .0.join(", "))]
    MissingReference(Vec<String>),

    #[error("unknown corpus {0:?}")]
    UnknownCorpus(String),

    #[error("index format error: {0}")]
    IndexFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Backend failures are the only errors `--skip-on-error` may swallow.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::Protocol(_))
    }
}
