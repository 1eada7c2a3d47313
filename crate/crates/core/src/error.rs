use thiserror::Error;

/// Errors raised anywhere in the training engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numeric overflow: non-finite output in {0}")]
    NumericOverflow(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("stale tape: parameters were modified after the forward pass")]
    StaleTape,

    #[error("load balancing error: {0}")]
    Balancing(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("corrupt mixture state: {0}")]
    StateCorruption(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid binary format: {0}")]
    Format(String),

    #[error("round {round}, component {component}: {source}")]
    Component {
        round: usize,
        component: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_component(self, round: usize, component: usize) -> Self {
        Error::Component {
            round,
            component,
            source: Box::new(self),
        }
    }
}
