use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unmapped symbol {symbol:?} at offset {offset}")]
    UnmappedSymbol { offset: usize, symbol: String },

    #[error("empty sequence record")]
    EmptyRecord,

    #[error("sequence of length {len} is too short for an initial context of depth {depth}")]
    TooShort { len: usize, depth: usize },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid change-points: {0}")]
    InvalidChangePoints(String),

    #[error("model class has {count} trees, above the enumeration limit {limit}")]
    ModelClassTooLarge { count: u128, limit: u128 },

    #[error("malformed tree model: {0}")]
    MalformedModel(String),

    #[error("no unique stationary distribution: {0}")]
    NoUniqueStationary(String),

    #[error("context state space of {states} states exceeds the cap {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("empty trace")]
    EmptyTrace,

    #[error("proposal/ratio mismatch: {0}")]
    RatioCaseMismatch(String),

    #[error("posterior has no support: {0}")]
    NoSupport(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
