//! Word and character error rates plus keyword precision and recall
//! measured over matching blocks.

mod blocks;
mod metrics;

pub use blocks::{dump_blocks, matching_blocks, MatchingBlock};
pub use metrics::{
    aggregate, cer, edit_distance, error_rate, keyword_prf, score_utterance, wer, word_chars,
    DatasetReport, KeywordMatchReport, UtteranceScore,
};
