use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A chord symbol that does not match the chord grammar.
    #[error("unrecognized chord symbol {raw:?}: {reason}")]
    ChordSymbol { raw: String, reason: String },

    /// A document that does not conform to its schema. `path` locates the
    /// offending field (e.g. `melody[3].onset`).
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// Well-formed input that violates a semantic invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A NaN or infinity surfaced in the named layer.
    #[error("non-finite value in {layer}")]
    Numerical { layer: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// An error on a specific line of a newline-delimited file (1-based).
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
