use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty logits")]
    EmptyLogits,

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular system; increase lambda or samples")]
    Singular,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("embedding dimension must be even, got {0}")]
    OddEmbeddingDim(usize),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("head index {head} out of range (model has {heads} heads)")]
    HeadOutOfRange { head: usize, heads: usize },

    #[error(
        "local dictionary has {d} words, above the enumeration limit of {limit}; \
         use the Monte Carlo estimator instead"
    )]
    EnumerationLimit { d: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
