use crate::TokenId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported model type `{0}`")]
    UnsupportedModel(String),
    #[error("unsupported pretokenizer: {0}")]
    UnsupportedPretokenizer(String),
    #[error("unsupported tokenizer feature: {0}")]
    Unsupported(String),
    #[error("malformed tokenizer definition: {0}")]
    Malformed(String),
    #[error("malformed merge: {0}")]
    MalformedMerge(String),
    #[error("unknown token id {0}")]
    UnknownToken(TokenId),
    #[error("byte {byte:#04x} at offset {offset} has no base token")]
    UnknownByte { byte: u8, offset: usize },
    #[error("dead tree at byte offset {0}: no valid token sequence covers the input")]
    DeadTree(usize),
    #[error("replay file has no entry for context {0:?}")]
    ReplayMiss(Vec<TokenId>),
    #[error("context must start with BOS")]
    MissingBos,
    #[error("not a current leaf: {0}")]
    NotALeaf(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("replay file: {0}")]
    ReplayFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
