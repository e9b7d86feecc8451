//! Exact byte-level conditioning of BPE language models.
//!
//! A token-level model is turned into a byte-level one by tracking every
//! valid token sequence that minimally covers the bytes seen so far (a
//! valid covering tree). The tree is small, grows incrementally as bytes
//! arrive, and its shared trunk is exactly the canonical tokenization.
//!
//! ```
//! use bytevct::tokenizer::{Tokenizer, TokenizerParts};
//! use bytevct::vct::Vct;
//!
//! let vocab = ["a", "b", "ab"].iter().map(|s| s.as_bytes().to_vec()).collect();
//! let tk = Tokenizer::from_parts(TokenizerParts { vocab, merges: vec![(0, 1)], ..Default::default() }).unwrap();
//! let mut tree = Vct::new(&tk);
//! assert!(tree.feed_byte(b'a').unwrap().is_empty());
//! ```

pub mod cli;
pub mod error;
pub mod lm;
pub mod oracle;
pub mod sampler;
pub mod pretok;
pub mod tokenizer;
pub mod validity;
pub mod vct;
pub mod verify;

mod text;

pub use error::Error;
pub use text::{escape_bytes, unescape_bytes};

/// Index into a tokenizer's vocabulary.
pub type TokenId = u32;
