//! Language-model scoring for shallow fusion.
//!
//! Three scorers share one state type:
//!
//! * [`CharLm`] scores every emitted token, boundaries included, with a
//!   character n-gram.
//! * [`WordLm`] scores nothing inside a word and the whole word with a word
//!   n-gram when a boundary token closes it.
//! * [`MultiLevelLm`] scores characters with the character model and, when a
//!   word closes, swaps the accumulated character score of that word for the
//!   word model's score.
//!
//! All scores are natural logs.

pub mod arpa;

pub use arpa::{ArpaError, NgramEntry, NgramModel, NgramState, Unit, DEFAULT_OOV_FLOOR};

/// Per-beam LM context.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmState {
    chars: NgramState,
    words: NgramState,
    partial: String,
    partial_logp: f64,
}

impl LmState {
    /// Characters of the word being spelled.
    pub fn partial_word(&self) -> &str {
        &self.partial
    }

    /// Character-level log-probability accumulated for the partial word.
    pub fn partial_logp(&self) -> f64 {
        self.partial_logp
    }
}

pub trait LmScorer: Send + Sync {
    fn initial_state(&self) -> LmState;

    /// Log-probability increment for emitting `token` and the resulting state.
    fn score(&self, state: &LmState, token: &str, is_boundary: bool) -> (f64, LmState);
}

/// Character n-gram over the raw token stream.
#[derive(Debug, Clone)]
pub struct CharLm {
    model: NgramModel,
}

impl CharLm {
    pub fn new(model: NgramModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &NgramModel {
        &self.model
    }
}

impl LmScorer for CharLm {
    fn initial_state(&self) -> LmState {
        LmState {
            chars: self.model.begin_state(),
            ..LmState::default()
        }
    }

    fn score(&self, state: &LmState, token: &str, _is_boundary: bool) -> (f64, LmState) {
        let (delta, chars) = self.model.score(&state.chars, token);
        (
            delta,
            LmState {
                chars,
                ..LmState::default()
            },
        )
    }
}

/// Word n-gram applied only when a boundary token completes a word.
#[derive(Debug, Clone)]
pub struct WordLm {
    model: NgramModel,
}

impl WordLm {
    pub fn new(model: NgramModel) -> Self {
        Self { model }
    }
}

impl LmScorer for WordLm {
    fn initial_state(&self) -> LmState {
        LmState {
            words: self.model.begin_state(),
            ..LmState::default()
        }
    }

    fn score(&self, state: &LmState, token: &str, is_boundary: bool) -> (f64, LmState) {
        if !is_boundary {
            let mut next = state.clone();
            next.partial.push_str(token);
            return (0.0, next);
        }
        if state.partial.is_empty() {
            return (0.0, state.clone());
        }
        let (delta, words) = self.model.score(&state.words, &state.partial);
        (
            delta,
            LmState {
                words,
                ..LmState::default()
            },
        )
    }
}

/// Character model inside words, word model substituted at word boundaries.
#[derive(Debug, Clone)]
pub struct MultiLevelLm {
    chars: NgramModel,
    words: NgramModel,
    oov_penalty: f64,
}

impl MultiLevelLm {
    pub fn new(chars: NgramModel, words: NgramModel) -> Self {
        Self {
            chars,
            words,
            oov_penalty: 0.0,
        }
    }

    /// Added to the kept character score of words the word model lacks.
    pub fn with_oov_penalty(mut self, penalty: f64) -> Self {
        self.oov_penalty = penalty;
        self
    }

    pub fn char_model(&self) -> &NgramModel {
        &self.chars
    }

    pub fn word_model(&self) -> &NgramModel {
        &self.words
    }

    /// Replaces the partial word's character score with its word-level score.
    ///
    /// Returns `word_logp - partial_char_logp` and the state with the word
    /// context advanced and the character context reset. Words unknown to the
    /// word model keep their character score plus the OOV penalty.
    pub fn finalize_word(&self, state: &LmState) -> (f64, LmState) {
        let word = state.partial.as_str();
        let (delta, words) = if self.words.contains(word) {
            let (word_logp, words) = self.words.score(&state.words, word);
            (word_logp - state.partial_logp, words)
        } else {
            let (_, words) = self.words.score(&state.words, word);
            (self.oov_penalty, words)
        };
        (
            delta,
            LmState {
                chars: self.chars.begin_state(),
                words,
                partial: String::new(),
                partial_logp: 0.0,
            },
        )
    }
}

impl LmScorer for MultiLevelLm {
    fn initial_state(&self) -> LmState {
        LmState {
            chars: self.chars.begin_state(),
            words: self.words.begin_state(),
            ..LmState::default()
        }
    }

    fn score(&self, state: &LmState, token: &str, is_boundary: bool) -> (f64, LmState) {
        if is_boundary && state.partial.is_empty() {
            return (0.0, state.clone());
        }
        let (char_delta, chars) = self.chars.score(&state.chars, token);
        let mut next = LmState {
            chars,
            words: state.words,
            partial: state.partial.clone(),
            partial_logp: state.partial_logp + char_delta,
        };
        if !is_boundary {
            next.partial.push_str(token);
            return (char_delta, next);
        }
        // The boundary's own character score belongs to the word it closes
        // and is replaced along with the rest of it.
        let (swap, next) = self.finalize_word(&next);
        (char_delta + swap, next)
    }
}
