use std::fmt;

/// Broad failure class, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Compute,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input file (vocabulary, CoNLL, TSV, JSON, checkpoint header).
    #[error("format error: {0}")]
    Format(String),

    /// A checkpoint whose payload disagrees with its own header.
    #[error("corrupt checkpoint: {0}")]
    Corruption(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Well-formed but unusable input (empty corpus, id out of range, bad span).
    #[error("input error: {0}")]
    Input(String),

    /// Weights or vocabulary that cannot be carried over into a new run.
    #[error("transfer error: {0}")]
    Transfer(String),

    #[error("dangling reference: {0}")]
    Reference(String),

    /// A caller broke an operation's precondition (e.g. a fully masked attention row).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no admissible answer span")]
    NoAnswer,

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) | Error::Transfer(_) => Category::Config,
            Error::Format(_)
            | Error::Corruption(_)
            | Error::Input(_)
            | Error::Reference(_)
            | Error::Json(_) => Category::Data,
            Error::Contract(_) | Error::NoAnswer | Error::Consistency(_) | Error::Io(_) => {
                Category::Compute
            }
        }
    }

    pub(crate) fn format(msg: impl fmt::Display) -> Self {
        Error::Format(msg.to_string())
    }

    pub(crate) fn input(msg: impl fmt::Display) -> Self {
        Error::Input(msg.to_string())
    }

    pub(crate) fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
