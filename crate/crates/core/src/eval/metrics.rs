use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::blocks::matching_blocks;
use crate::keywords::tokenize;

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edits over reference length; an empty reference divides by one.
pub fn error_rate(edits: usize, ref_len: usize) -> f64 {
    edits as f64 / ref_len.max(1) as f64
}

pub fn wer<S: AsRef<str>>(ref_words: &[S], hyp_words: &[S]) -> f64 {
    let r: Vec<&str> = ref_words.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hyp_words.iter().map(AsRef::as_ref).collect();
    error_rate(edit_distance(&r, &h), r.len())
}

pub fn cer(ref_chars: &[char], hyp_chars: &[char]) -> f64 {
    error_rate(edit_distance(ref_chars, hyp_chars), ref_chars.len())
}

/// Characters of the words joined by single spaces.
pub fn word_chars<S: AsRef<str>>(words: &[S]) -> Vec<char> {
    let mut out = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.extend(w.as_ref().chars());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeywordMatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl KeywordMatchReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Classifies every keyword occurrence by whether it sits in a matching block.
pub fn keyword_prf<S: AsRef<str>>(
    ref_words: &[S],
    hyp_words: &[S],
    keywords: &HashSet<String>,
) -> KeywordMatchReport {
    let r: Vec<&str> = ref_words.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hyp_words.iter().map(AsRef::as_ref).collect();
    let blocks = matching_blocks(&r, &h);
    let mut in_ref_block = vec![false; r.len()];
    let mut in_hyp_block = vec![false; h.len()];
    for b in &blocks {
        in_ref_block[b.ref_range()].fill(true);
        in_hyp_block[b.hyp_range()].fill(true);
    }
    let is_kw = |w: &str| keywords.contains(w);
    let mut tp = 0;
    let mut fn_ = 0;
    for (w, &matched) in r.iter().zip(&in_ref_block) {
        if is_kw(w) {
            if matched {
                tp += 1;
            } else {
                fn_ += 1;
            }
        }
    }
    let fp = h
        .iter()
        .zip(&in_hyp_block)
        .filter(|(w, &matched)| !matched && is_kw(w))
        .count();
    KeywordMatchReport::from_counts(tp, fp, fn_)
}

/// Raw counts for one utterance, ready to be summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub word_edits: usize,
    pub ref_words: usize,
    pub char_edits: usize,
    pub ref_chars: usize,
    pub wer: f64,
    pub cer: f64,
    pub keywords: KeywordMatchReport,
}

/// Scores raw texts after running both through the shared tokenizer.
pub fn score_utterance(reference: &str, hypothesis: &str, keywords: &HashSet<String>) -> UtteranceScore {
    let r = tokenize(reference);
    let h = tokenize(hypothesis);
    let word_edits = edit_distance(&r, &h);
    let (rc, hc) = (word_chars(&r), word_chars(&h));
    let char_edits = edit_distance(&rc, &hc);
    UtteranceScore {
        word_edits,
        ref_words: r.len(),
        char_edits,
        ref_chars: rc.len(),
        wer: error_rate(word_edits, r.len()),
        cer: error_rate(char_edits, rc.len()),
        keywords: keyword_prf(&r, &h, keywords),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub utterances: usize,
    pub word_edits: usize,
    pub ref_words: usize,
    pub char_edits: usize,
    pub ref_chars: usize,
    pub wer: f64,
    pub cer: f64,
    pub keywords: KeywordMatchReport,
}

/// Micro-average: counts are summed before dividing.
pub fn aggregate<'a>(scores: impl IntoIterator<Item = &'a UtteranceScore>) -> DatasetReport {
    let (mut n, mut we, mut rw, mut ce, mut rc) = (0, 0, 0, 0, 0);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for s in scores {
        n += 1;
        we += s.word_edits;
        rw += s.ref_words;
        ce += s.char_edits;
        rc += s.ref_chars;
        tp += s.keywords.tp;
        fp += s.keywords.fp;
        fn_ += s.keywords.fn_;
    }
    DatasetReport {
        utterances: n,
        word_edits: we,
        ref_words: rw,
        char_edits: ce,
        ref_chars: rc,
        wer: error_rate(we, rw),
        cer: error_rate(ce, rc),
        keywords: KeywordMatchReport::from_counts(tp, fp, fn_),
    }
}
