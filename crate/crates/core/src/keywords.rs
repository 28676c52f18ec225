//! Per-document keyword extraction with TF-IDF.
//!
//! Documents are typically books or sessions: every transcript belonging to
//! the same document is pooled, words are ranked by
//! `count(w, d) * (ln((1 + N) / (1 + df(w))) + 1)`, and the top share of the
//! document's distinct multi-character words is kept.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KeywordError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("percent must be in (0, 100], got {0}")]
    InvalidPercent(f64),
}

/// Word tokenizer shared by extraction and evaluation.
///
/// Splits on whitespace, trims non-letters from both ends of each piece
/// (so inner apostrophes as in "cap'n" survive) and lower-cases.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphabetic()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Term counts per document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: BTreeMap<String, BTreeMap<String, u64>>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one transcript to a document, creating the document if needed.
    pub fn add(&mut self, doc_id: &str, text: &str) {
        let bag = self.docs.entry(doc_id.to_string()).or_default();
        for w in tokenize(text) {
            *bag.entry(w).or_insert(0) += 1;
        }
    }

    /// Folds another corpus in, summing counts of shared documents.
    pub fn merge(&mut self, other: Corpus) {
        for (doc, bag) in other.docs {
            let mine = self.docs.entry(doc).or_default();
            for (w, c) in bag {
                *mine.entry(w).or_insert(0) += c;
            }
        }
    }

    pub fn num_documents(&self) -> usize {
        self.docs.len()
    }

    pub fn document_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn counts(&self, doc_id: &str) -> Option<&BTreeMap<String, u64>> {
        self.docs.get(doc_id)
    }

    /// Number of documents containing each word.
    pub fn document_frequencies(&self) -> HashMap<&str, usize> {
        let mut df: HashMap<&str, usize> = HashMap::new();
        for bag in self.docs.values() {
            for w in bag.keys() {
                *df.entry(w.as_str()).or_insert(0) += 1;
            }
        }
        df
    }
}

pub fn build_corpus<I, D, T>(records: I) -> Corpus
where
    I: IntoIterator<Item = (D, T)>,
    D: AsRef<str>,
    T: AsRef<str>,
{
    let mut corpus = Corpus::new();
    for (doc, text) in records {
        corpus.add(doc.as_ref(), text.as_ref());
    }
    corpus
}

/// Parallel [`build_corpus`]; the result does not depend on scheduling.
pub fn build_corpus_par(records: &[(String, String)]) -> Corpus {
    records
        .par_iter()
        .fold(Corpus::new, |mut c, (doc, text)| {
            c.add(doc, text);
            c
        })
        .reduce(Corpus::new, |mut a, b| {
            a.merge(b);
            a
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub score: f64,
}

fn idf(num_docs: usize, df: usize) -> f64 {
    ((1.0 + num_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn score_document(
    bag: &BTreeMap<String, u64>,
    df: &HashMap<&str, usize>,
    num_docs: usize,
) -> Vec<ScoredWord> {
    let mut scored: Vec<ScoredWord> = bag
        .iter()
        .map(|(w, &count)| ScoredWord {
            word: w.clone(),
            score: count as f64 * idf(num_docs, df[w.as_str()]),
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.word.cmp(&b.word)));
    scored
}

/// TF-IDF scores of a document's words, best first, ties by word.
pub fn tfidf_scores(corpus: &Corpus, doc_id: &str) -> Result<Vec<ScoredWord>, KeywordError> {
    let bag = corpus
        .counts(doc_id)
        .ok_or_else(|| KeywordError::UnknownDocument(doc_id.to_string()))?;
    Ok(score_document(bag, &corpus.document_frequencies(), corpus.num_documents()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSelection {
    pub doc_id: String,
    pub scored: Vec<ScoredWord>,
    pub selected: Vec<String>,
}

/// Number of words kept from `eligible` candidates at `percent`.
pub fn selection_size(eligible: usize, percent: f64) -> usize {
    // guard against 0.07 * 100 style rounding pushing an exact product up
    let raw = percent * eligible as f64 / 100.0;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(eligible)
}

/// Keeps the top `percent` of multi-character words from ranked scores.
pub fn select_keywords(
    doc_id: &str,
    scores: Vec<ScoredWord>,
    percent: f64,
) -> Result<KeywordSelection, KeywordError> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(KeywordError::InvalidPercent(percent));
    }
    let eligible: Vec<&ScoredWord> = scores
        .iter()
        .filter(|s| s.word.chars().count() > 1)
        .collect();
    let n = selection_size(eligible.len(), percent);
    let selected = eligible[..n].iter().map(|s| s.word.clone()).collect();
    Ok(KeywordSelection {
        doc_id: doc_id.to_string(),
        scored: scores,
        selected,
    })
}

/// Selections for every document, ordered by document id.
pub fn extract_all(corpus: &Corpus, percent: f64) -> Result<Vec<KeywordSelection>, KeywordError> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(KeywordError::InvalidPercent(percent));
    }
    let df = corpus.document_frequencies();
    let n = corpus.num_documents();
    let docs: Vec<(&String, &BTreeMap<String, u64>)> = corpus.docs.iter().collect();
    docs.par_iter()
        .map(|(id, bag)| select_keywords(id, score_document(bag, &df, n), percent))
        .collect()
}
