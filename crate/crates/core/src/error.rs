use std::fmt;

use crate::model::StateId;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a transition required by a path is missing from a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnseenKind {
    /// The step uses a link that is absent from the network topology.
    StructuralZero,
    /// The step is possible on the topology but was never observed.
    Unobserved,
}

impl fmt::Display for UnseenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnseenKind::StructuralZero => f.write_str("structural zero"),
            UnseenKind::Unobserved => f.write_str("unobserved"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input contains no paths")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("unseen transition {from} -> {to} ({kind})")]
    UnseenTransition {
        from: StateId,
        to: StateId,
        kind: UnseenKind,
    },

    #[error("no prediction for prefix {0} and fallback is disabled")]
    NoPrediction(String),

    #[error("walk count overflow at order {order}")]
    Overflow { order: usize },

    #[error("malformed model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
