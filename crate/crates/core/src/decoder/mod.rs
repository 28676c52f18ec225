//! Keyword-boosted CTC prefix beam search.
//!
//! At every frame each live prefix is extended by blank, by its own last
//! token (collapsing), and by every other token. An extension that emits a
//! token adds `w_LM * Δlm + K(s)` on top of the acoustic log-probability,
//! where `K` comes from the beam's position in the keyword tree (see
//! [`boost`]). Prefixes reached along several alignments are merged by
//! log-sum-exp before the beam is cut back to `beam_width`.

pub mod boost;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emissions::{EmissionError, EmissionMatrix};
use crate::lm::LmScorer;
use crate::trie::KeywordTrie;
use crate::vocab::{TokenId, Vocabulary};

pub use boost::{
    advance, escape_at_boundary, keyword_scores, replay, step_update_node, Branch, KeywordCursor,
    NodeUpdate,
};

/// Default number of hypotheses kept per frame.
pub const DEFAULT_BEAM_WIDTH: usize = 100;
/// Tokens more than this many nats below the frame's best are not expanded.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("emissions have {emissions} columns but the vocabulary has {vocab} tokens")]
    ShapeMismatch { emissions: usize, vocab: usize },
    #[error("non-finite emission at frame {frame}, token {token}")]
    NonFiniteEmission { frame: usize, token: usize },
    #[error("emission matrix has no frames")]
    EmptyEmissions,
    #[error("keyword tree was built for a different vocabulary")]
    VocabMismatch,
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub beam_width: usize,
    pub keyword_weight: f64,
    pub lm_weight: f64,
    /// `None` expands every token at every frame.
    pub prune_logp_threshold: Option<f64>,
    /// Added once per word in the hypothesis.
    pub length_bonus: f64,
    /// Number of hypotheses reported, capped by the beam width.
    pub nbest: usize,
    /// Return an empty transcript for zero-frame input instead of failing.
    pub allow_empty: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            beam_width: DEFAULT_BEAM_WIDTH,
            keyword_weight: 0.0,
            lm_weight: 0.0,
            prune_logp_threshold: Some(DEFAULT_PRUNE_THRESHOLD),
            length_bonus: 0.0,
            nbest: 1,
            allow_empty: false,
        }
    }
}

impl DecoderConfig {
    /// No beam cut and no token pruning: every reachable prefix is kept.
    pub fn exhaustive() -> Self {
        Self {
            beam_width: usize::MAX,
            prune_logp_threshold: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |msg: &str| Err(DecodeError::InvalidConfig(msg.to_string()));
        if self.beam_width == 0 {
            return bad("beam width must be at least 1");
        }
        if !(self.keyword_weight.is_finite() && self.keyword_weight >= 0.0) {
            return bad("keyword weight must be finite and non-negative");
        }
        if !(self.lm_weight.is_finite() && self.lm_weight >= 0.0) {
            return bad("LM weight must be finite and non-negative");
        }
        if !self.length_bonus.is_finite() {
            return bad("length bonus must be finite");
        }
        if let Some(t) = self.prune_logp_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return bad("prune threshold must be finite and non-negative");
            }
        }
        Ok(())
    }
}

/// One scored hypothesis.
///
/// `score_total = score_am + lm_weight * score_lm + score_boost + score_length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub transcript: String,
    #[serde(skip)]
    pub tokens: Vec<TokenId>,
    pub score_total: f64,
    pub score_am: f64,
    pub score_lm: f64,
    pub score_boost: f64,
    /// `length_bonus * words`.
    pub score_length: f64,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub transcript: String,
    pub tokens: Vec<TokenId>,
    pub score_total: f64,
    pub score_am: f64,
    pub score_lm: f64,
    pub score_boost: f64,
    pub score_length: f64,
    /// Best first; `n_best[0]` is the hypothesis above.
    pub n_best: Vec<Hypothesis>,
}

impl DecodeResult {
    pub fn best(&self) -> &Hypothesis {
        &self.n_best[0]
    }
}

/// Decodes one utterance.
///
/// Without a keyword tree, or with `keyword_weight == 0`, no boosting code
/// runs and the result is plain prefix beam search.
pub fn decode(
    emissions: &EmissionMatrix,
    vocab: &Vocabulary,
    trie: Option<&KeywordTrie>,
    lm: Option<&dyn LmScorer>,
    config: &DecoderConfig,
) -> Result<DecodeResult, DecodeError> {
    config.validate()?;
    if emissions.vocab_size() != vocab.len() {
        return Err(DecodeError::ShapeMismatch {
            emissions: emissions.vocab_size(),
            vocab: vocab.len(),
        });
    }
    if let Err(EmissionError::NonFinite { frame, token }) = emissions.check_finite() {
        return Err(DecodeError::NonFiniteEmission { frame, token });
    }
    if emissions.is_empty() && !config.allow_empty {
        return Err(DecodeError::EmptyEmissions);
    }
    if let Some(t) = trie {
        if t.alphabet() != vocab.tokens() {
            return Err(DecodeError::VocabMismatch);
        }
    }
    let trie = trie.filter(|t| !t.is_empty() && config.keyword_weight != 0.0);
    let n_best = search::PrefixSearch::new(vocab, trie, lm, config).run(emissions);
    let best = n_best[0].clone();
    Ok(DecodeResult {
        transcript: best.transcript,
        tokens: best.tokens,
        score_total: best.score_total,
        score_am: best.score_am,
        score_lm: best.score_lm,
        score_boost: best.score_boost,
        score_length: best.score_length,
        n_best,
    })
}

/// Standard CTC collapse: merge repeats, then drop blanks.
pub fn collapse(alignment: &[TokenId], blank: TokenId) -> Vec<TokenId> {
    let mut out = Vec::new();
    let mut prev = None;
    for &t in alignment {
        if Some(t) != prev && t != blank {
            out.push(t);
        }
        prev = Some(t);
    }
    out
}
