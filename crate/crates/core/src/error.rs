use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a domain invariant.
    #[error("invalid data: {0}")]
    Data(String),

    /// A caller-supplied parameter is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The configuration cannot produce a result (e.g. an empty density core).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The inference endpoint could not be reached.
    #[error("transport error: {message}")]
    Transport {
        message: String,
        failed_doc_ids: Vec<String>,
    },

    /// The inference endpoint answered with something that breaks the wire contract.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// An input file is unreadable or inconsistent with the corpus.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A required upstream stage has not been run.
    #[error("missing stage output: run `{stage}` first ({path})")]
    MissingStage { stage: String, path: PathBuf },

    /// An upstream artifact changed since the stage that produced it ran.
    #[error("stale input {path}: checksum differs from the one recorded by `{stage}` (rerun it or pass --force)")]
    StaleInput { stage: String, path: PathBuf },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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

    /// True for errors that originate from talking to the inference backend.
    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
