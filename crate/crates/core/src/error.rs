use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state index {index} out of range for {n_states} states")]
    StateOutOfRange { index: usize, n_states: usize },

    #[error("action index {index} out of range for {n_actions} actions")]
    ActionOutOfRange { index: usize, n_actions: usize },

    #[error("row {row} is not a probability distribution (sum = {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("desired state set is empty")]
    EmptyDesiredSet,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("fitness evaluation failed for genome {genome}: {reason}")]
    Fitness { genome: String, reason: String },

    #[error("stage `{stage}` failed (artifacts so far: {artifacts:?}): {source}")]
    Stage {
        stage: &'static str,
        artifacts: Vec<PathBuf>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failing stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Shape(_)
                | Error::StateOutOfRange { .. }
                | Error::ActionOutOfRange { .. }
                | Error::NotStochastic { .. }
                | Error::Config(_)
                | Error::EmptyDesiredSet
                | Error::Parse { .. }
                | Error::Json(_)
        )
    }
}
