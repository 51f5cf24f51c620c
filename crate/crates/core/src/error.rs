use thiserror::Error;

/// Errors raised by estimation, simulation and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generation failure: {0}")]
    GenerationFailure(String),

    #[error("instability detected: {0}")]
    InstabilityDetected(String),

    #[error("insufficient local data at tau={tau:.6} (node {node:?}): {reason}")]
    InsufficientLocalData {
        node: Option<usize>,
        tau: f64,
        reason: String,
    },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate residuals: {0}")]
    DegenerateResiduals(String),

    #[error("parse error in {file} at row {row}: {msg}")]
    Parse { file: String, row: usize, msg: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
