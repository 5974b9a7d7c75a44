use thiserror::Error;

use crate::network::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("type-2 cycle through nodes {0:?}")]
    Type2Cycle(Vec<NodeId>),

    #[error("missing input value for node {node}")]
    MissingInput { node: NodeId },

    #[error("expected {expected} input values, got {got}")]
    InputCount { expected: usize, got: usize },

    #[error("non-finite value at node {node}, turn {turn}")]
    NonFinite { node: NodeId, turn: usize },

    #[error("non-finite gradient at node {node}, turn {turn}")]
    NonFiniteGradient { node: NodeId, turn: usize },

    #[error("polynomial expansion exceeded {cap} terms")]
    TermCapExceeded { cap: usize },

    #[error("polynomial expansion is only defined for activation-free networks")]
    ActivationPresent,

    #[error("length mismatch: expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unsupported feature count {0} (expected 6 or 10)")]
    UnsupportedFeatureCount(usize),

    #[error("model/topology mismatch: {0}")]
    ModelMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no scored turns")]
    NoScoredTurns,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used as the `error[kind]` prefix of
    /// command-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidTopology(_) | Error::Type2Cycle(_) => "topology",
            Error::MissingInput { .. } | Error::InputCount { .. } | Error::LengthMismatch { .. } => {
                "shape"
            }
            Error::NonFinite { .. } | Error::NonFiniteGradient { .. } => "numeric",
            Error::TermCapExceeded { .. } | Error::ActivationPresent => "expand",
            Error::UnsupportedFeatureCount(_) | Error::ModelMismatch(_) => "model",
            Error::InvalidConfig(_) => "config",
            Error::EmptyBatch | Error::EmptyCorpus | Error::NoScoredTurns => "data",
            Error::Parse { .. } | Error::Json(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
