use std::path::PathBuf;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{0} is not an even year; general elections fall on even years")]
    OddYear(i32),

    #[error("invalid date window: {0}")]
    InvalidWindow(String),

    #[error("invalid race: {0}")]
    InvalidRace(String),

    #[error("no Wikipedia article titled {title:?}")]
    PageNotFound { title: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },

    #[error("candidate name {0:?} does not yield a first and last name")]
    EmptyName(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("offline mode: no cached response for {endpoint} {query}")]
    CacheMiss { endpoint: String, query: String },

    #[error("malformed {endpoint} response: {message}")]
    MalformedResponse { endpoint: String, message: String },

    #[error("{}:{line}: {message}", path.display())]
    Schema { path: PathBuf, line: u64, message: String },

    #[error("duplicate candidate {candidate_id} in {race}")]
    DuplicateCandidate { candidate_id: String, race: String },

    #[error("ambiguous Wikipedia linkage for keys {keys:?}; add overrides")]
    AmbiguousLink { keys: Vec<String> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn schema(path: &std::path::Path, line: u64, message: impl Into<String>) -> Self {
        IngestError::Schema { path: path.to_path_buf(), line, message: message.into() }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }

    /// Errors worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, IngestError::Transport(_) | IngestError::RateLimited { .. })
    }

    /// Whether the error came from the network layer (including offline cache misses).
    pub fn is_network(&self) -> bool {
        matches!(
            self,
            IngestError::Transport(_) | IngestError::RateLimited { .. } | IngestError::CacheMiss { .. }
        )
    }
}
