//! Token vocabulary of a character-level CTC acoustic model.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index into a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("vocabulary needs at least 2 tokens, got {0}")]
    TooSmall(usize),
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("empty token at index {0}")]
    EmptyToken(usize),
    #[error("blank and boundary share token id {0}")]
    BlankIsBoundary(u32),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    OutOfRange { id: u32, size: usize },
}

/// Letter case used by the alphabetic tokens of a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseConvention {
    Lower,
    Upper,
}

/// Ordered token list with the CTC blank and an optional word delimiter.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    blank: TokenId,
    boundary: Option<TokenId>,
    by_text: HashMap<String, TokenId>,
    case: CaseConvention,
}

impl Vocabulary {
    pub fn new(
        tokens: Vec<String>,
        blank: TokenId,
        boundary: Option<TokenId>,
    ) -> Result<Self, VocabError> {
        if tokens.len() < 2 {
            return Err(VocabError::TooSmall(tokens.len()));
        }
        let size = tokens.len();
        for id in std::iter::once(blank).chain(boundary) {
            if id.index() >= size {
                return Err(VocabError::OutOfRange { id: id.0, size });
            }
        }
        if boundary == Some(blank) {
            return Err(VocabError::BlankIsBoundary(blank.0));
        }
        let mut by_text = HashMap::with_capacity(size);
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(VocabError::EmptyToken(i));
            }
            if by_text.insert(tok.clone(), TokenId(i as u32)).is_some() {
                return Err(VocabError::DuplicateToken(tok.clone()));
            }
        }
        // Only single-character tokens count; specials such as "<pad>" do not.
        let letters = || tokens.iter().filter(|t| t.chars().count() == 1).flat_map(|t| t.chars());
        let has_lower = letters().any(char::is_lowercase);
        let has_upper = letters().any(char::is_uppercase);
        let case = if has_upper && !has_lower {
            CaseConvention::Upper
        } else {
            CaseConvention::Lower
        };
        Ok(Self {
            tokens,
            blank,
            boundary,
            by_text,
            case,
        })
    }

    /// Blank at index 0 and `|` as the boundary when present.
    pub fn with_defaults(tokens: Vec<String>) -> Result<Self, VocabError> {
        let boundary = tokens
            .iter()
            .position(|t| t == "|")
            .map(|i| TokenId(i as u32));
        Self::new(tokens, TokenId(0), boundary)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank(&self) -> TokenId {
        self.blank
    }

    pub fn boundary(&self) -> Option<TokenId> {
        self.boundary
    }

    pub fn is_boundary(&self, id: TokenId) -> bool {
        self.boundary == Some(id)
    }

    pub fn case_convention(&self) -> CaseConvention {
        self.case
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn id(&self, text: &str) -> Option<TokenId> {
        self.by_text.get(text).copied()
    }

    /// Token carrying a single character, excluding blank and boundary.
    pub fn char_id(&self, c: char) -> Option<TokenId> {
        let mut buf = [0u8; 4];
        self.id(c.encode_utf8(&mut buf))
            .filter(|&id| id != self.blank && Some(id) != self.boundary)
    }

    /// Folds text into the vocabulary's letter case.
    pub fn normalize_case(&self, text: &str) -> String {
        match self.case {
            CaseConvention::Lower => text.to_lowercase(),
            CaseConvention::Upper => text.to_uppercase(),
        }
    }

    /// Renders collapsed tokens as text; boundaries become single spaces.
    pub fn render(&self, tokens: &[TokenId]) -> String {
        let mut words: Vec<String> = vec![String::new()];
        for &t in tokens {
            if t == self.blank {
                continue;
            }
            if self.is_boundary(t) {
                words.push(String::new());
            } else {
                words.last_mut().unwrap().push_str(self.token(t));
            }
        }
        words.retain(|w| !w.is_empty());
        words.join(" ")
    }
}
