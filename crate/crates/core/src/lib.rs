//! Keyword-boosted CTC decoding.
//!
//! Decodes CTC emission matrices with prefix beam search, optionally boosting
//! hypotheses that spell words from a keyword list and fusing an n-gram
//! language model. Also extracts per-document keyword lists with TF-IDF and
//! scores transcripts with WER/CER and keyword precision/recall.

pub mod decoder;
pub mod emissions;
pub mod eval;
pub mod cli;
pub mod io;
pub mod keywords;
pub mod lm;
pub mod synth;
pub mod trie;
pub mod vocab;

pub use decoder::{decode, DecodeError, DecodeResult, DecoderConfig, Hypothesis};
pub use emissions::EmissionMatrix;
pub use trie::{KeywordTrie, NodeId, TrieError};
pub use vocab::{TokenId, Vocabulary};
