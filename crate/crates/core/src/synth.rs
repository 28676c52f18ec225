//! Synthetic CTC emissions with planted keywords.
//!
//! Texts are rendered to emissions token by token: each token gets a few
//! frames peaked on it followed by a blank frame, words are separated by the
//! boundary token, and the remaining mass is spread with Gaussian logit
//! noise. A corruption moves the peak of one character to a rival token and
//! leaves the true token `margin` nats behind over that character's frames,
//! so acoustic evidence alone picks the wrong spelling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::emissions::{log_softmax, EmissionMatrix};
use crate::vocab::{TokenId, Vocabulary};

const LETTERS: &str = "abcdefghijklmnopqrstuvwxyz";
const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";

/// `<pad>` (blank), `|` (boundary), `'` and the lowercase letters.
pub fn letter_vocab() -> Vocabulary {
    let mut tokens = vec!["<pad>".to_string(), "|".to_string(), "'".to_string()];
    tokens.extend(LETTERS.chars().map(String::from));
    Vocabulary::with_defaults(tokens).expect("static vocabulary is valid")
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub frames_per_token: usize,
    /// Logit of the peaked token; the others are drawn around zero.
    pub peak: f64,
    pub noise_std: f64,
    /// Share of planted keyword occurrences given one corrupted character.
    pub keyword_error_rate: f64,
    /// Share of filler words given one corrupted character.
    pub filler_error_rate: f64,
    /// Acoustic deficit of the true character, drawn uniformly from this range.
    pub margin: (f64, f64),
    pub words_per_utterance: (usize, usize),
    pub keywords_per_utterance: (usize, usize),
    pub docs: usize,
    pub keywords_per_doc: usize,
    pub filler_lexicon: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames_per_token: 2,
            peak: 9.0,
            noise_std: 1.0,
            keyword_error_rate: 0.15,
            filler_error_rate: 0.05,
            margin: (0.5, 4.5),
            words_per_utterance: (6, 10),
            keywords_per_utterance: (1, 2),
            docs: 10,
            keywords_per_doc: 8,
            filler_lexicon: 300,
        }
    }
}

/// One character forced to the wrong token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    /// Index into the utterance's token sequence.
    pub position: usize,
    pub rival: TokenId,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub id: String,
    pub doc_id: String,
    pub reference: String,
    pub emissions: EmissionMatrix,
    /// Keyword occurrences in the reference.
    pub planted: usize,
    /// Keyword occurrences whose spelling was corrupted.
    pub corrupted_keywords: usize,
}

#[derive(Debug, Clone)]
pub struct SynthSuite {
    pub vocab: Vocabulary,
    /// Keyword list per document, in document order.
    pub docs: Vec<(String, Vec<String>)>,
    pub utterances: Vec<SynthUtterance>,
}

impl SynthSuite {
    pub fn keywords_for(&self, doc_id: &str) -> &[String] {
        self.docs
            .iter()
            .find(|(d, _)| d == doc_id)
            .map(|(_, k)| k.as_slice())
            .unwrap_or(&[])
    }
}

/// Token ids of `text`: words joined by the boundary token.
pub fn text_tokens(vocab: &Vocabulary, text: &str) -> Vec<TokenId> {
    let boundary = vocab.boundary().expect("synthetic vocabularies have a boundary");
    let mut out = Vec::new();
    for (i, w) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(boundary);
        }
        out.extend(w.chars().map(|c| vocab.char_id(c).expect("synthetic text uses vocab letters")));
    }
    out
}

/// Renders a token sequence into emissions with the given corruptions.
pub fn render<R: Rng>(
    vocab: &Vocabulary,
    tokens: &[TokenId],
    corruptions: &[Corruption],
    cfg: &SynthConfig,
    rng: &mut R,
) -> EmissionMatrix {
    let noise = Normal::new(0.0, cfg.noise_std).expect("valid std");
    let v = vocab.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(tokens.len() * (cfg.frames_per_token + 1) + 1);
    let mut frame = |rng: &mut R, peaks: &[(TokenId, f64)]| {
        let mut logits: Vec<f64> = (0..v).map(|_| noise.sample(rng)).collect();
        for &(t, l) in peaks {
            logits[t.index()] = l;
        }
        rows.push(log_softmax(&logits));
    };
    frame(rng, &[(vocab.blank(), cfg.peak)]);
    for (pos, &tok) in tokens.iter().enumerate() {
        let peaks = match corruptions.iter().find(|c| c.position == pos) {
            Some(c) => vec![
                (c.rival, cfg.peak),
                (tok, cfg.peak - c.margin / cfg.frames_per_token as f64),
            ],
            None => vec![(tok, cfg.peak)],
        };
        for _ in 0..cfg.frames_per_token {
            frame(rng, &peaks);
        }
        frame(rng, &[(vocab.blank(), cfg.peak)]);
    }
    EmissionMatrix::from_rows_f64(&rows).expect("rows share the vocabulary width")
}

fn pseudo_word<R: Rng>(rng: &mut R, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
        w.push(*VOWELS.choose(rng).unwrap() as char);
    }
    if rng.gen_bool(0.5) {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
    }
    w
}

fn hamming_close(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count() <= 1
}

/// Fresh words, distinct from each other and at least two substitutions
/// away from every word in `avoid`.
fn lexicon<R: Rng>(rng: &mut R, n: usize, syllables: (usize, usize), avoid: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let syl = rng.gen_range(syllables.0..=syllables.1);
        let w = pseudo_word(rng, syl);
        if avoid.iter().chain(&out).any(|o| o == &w || hamming_close(o, &w)) {
            continue;
        }
        out.push(w);
    }
    out
}

fn rival_letter<R: Rng>(rng: &mut R, vocab: &Vocabulary, truth: TokenId) -> TokenId {
    loop {
        let c = LETTERS.as_bytes()[rng.gen_range(0..LETTERS.len())] as char;
        let id = vocab.char_id(c).expect("letters are in the vocabulary");
        if id != truth {
            return id;
        }
    }
}

fn margin<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> f64 {
    rng.gen_range(cfg.margin.0..cfg.margin.1)
}

/// Utterances drawn per document from a shared filler lexicon plus the
/// document's own keywords. A share of keyword occurrences is misspelled by
/// the acoustics, which is what boosting should recover.
pub fn planted_suite(seed: u64, utterances: usize, cfg: &SynthConfig) -> SynthSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = letter_vocab();
    let all_keywords = lexicon(&mut rng, cfg.docs * cfg.keywords_per_doc, (3, 4), &[]);
    let fillers = lexicon(&mut rng, cfg.filler_lexicon, (1, 3), &all_keywords);
    let docs: Vec<(String, Vec<String>)> = all_keywords
        .chunks(cfg.keywords_per_doc)
        .enumerate()
        .map(|(i, k)| (format!("doc{i:02}"), k.to_vec()))
        .collect();

    let mut out = Vec::with_capacity(utterances);
    for u in 0..utterances {
        let (doc_id, keywords) = &docs[u % docs.len()];
        let n_words = rng.gen_range(cfg.words_per_utterance.0..=cfg.words_per_utterance.1);
        let n_kw = rng.gen_range(cfg.keywords_per_utterance.0..=cfg.keywords_per_utterance.1).min(n_words);
        let mut words: Vec<(String, bool)> = (0..n_words)
            .map(|_| (fillers.choose(&mut rng).unwrap().clone(), false))
            .collect();
        let slots: Vec<usize> = rand::seq::index::sample(&mut rng, n_words, n_kw).into_vec();
        for s in slots {
            words[s] = (keywords.choose(&mut rng).unwrap().clone(), true);
        }

        let reference = words.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ");
        let tokens = text_tokens(&vocab, &reference);
        let mut corruptions = Vec::new();
        let mut corrupted_keywords = 0;
        let mut start = 0;
        for (w, is_kw) in &words {
            let rate = if *is_kw { cfg.keyword_error_rate } else { cfg.filler_error_rate };
            if rng.gen_bool(rate) {
                // never the first character: a keyword's first edge carries no boost
                let len = w.chars().count();
                let offset = if len > 1 { rng.gen_range(1..len) } else { 0 };
                let position = start + offset;
                corruptions.push(Corruption {
                    position,
                    rival: rival_letter(&mut rng, &vocab, tokens[position]),
                    margin: margin(&mut rng, cfg),
                });
                corrupted_keywords += usize::from(*is_kw);
            }
            start += w.chars().count() + 1;
        }
        let emissions = render(&vocab, &tokens, &corruptions, cfg, &mut rng);
        out.push(SynthUtterance {
            id: format!("utt{u:04}"),
            doc_id: doc_id.clone(),
            reference,
            emissions,
            planted: n_kw,
            corrupted_keywords,
        });
    }
    SynthSuite {
        vocab,
        docs,
        utterances: out,
    }
}

/// Utterances whose reference holds a non-keyword one substitution away from
/// a keyword, spoken clearly, next to a correctly spoken keyword. Large
/// boosts turn the near word into the keyword.
pub fn overboost_suite(seed: u64, utterances: usize, cfg: &SynthConfig) -> SynthSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = letter_vocab();
    let keywords = lexicon(&mut rng, cfg.keywords_per_doc, (3, 4), &[]);
    let fillers = lexicon(&mut rng, cfg.filler_lexicon, (1, 3), &keywords);
    let doc_id = "doc00".to_string();

    let mut out = Vec::with_capacity(utterances);
    for u in 0..utterances {
        let kw = keywords.choose(&mut rng).unwrap().clone();
        let near = loop {
            let mut chars: Vec<char> = kw.chars().collect();
            let pos = rng.gen_range(1..chars.len());
            let truth = vocab.char_id(chars[pos]).unwrap();
            chars[pos] = vocab.token(rival_letter(&mut rng, &vocab, truth)).chars().next().unwrap();
            let w: String = chars.into_iter().collect();
            if !keywords.contains(&w) {
                break w;
            }
        };
        let mut words: Vec<String> = (0..4).map(|_| fillers.choose(&mut rng).unwrap().clone()).collect();
        words.insert(1, kw);
        words.insert(4, near);
        let reference = words.join(" ");
        let tokens = text_tokens(&vocab, &reference);
        let emissions = render(&vocab, &tokens, &[], cfg, &mut rng);
        out.push(SynthUtterance {
            id: format!("near{u:04}"),
            doc_id: doc_id.clone(),
            reference,
            emissions,
            planted: 1,
            corrupted_keywords: 0,
        });
    }
    SynthSuite {
        vocab,
        docs: vec![(doc_id, keywords)],
        utterances: out,
    }
}

/// A character n-gram model in ARPA form estimated from `texts`.
///
/// Spaces become `|`. Every alphabet symbol gets an add-one unigram;
/// higher orders use discounted relative frequencies with a flat backoff
/// weight. Good enough as a realistic fixture, not as a trained model.
pub fn char_arpa<S: AsRef<str>>(texts: &[S], alphabet: &[&str], order: usize) -> String {
    use std::collections::BTreeMap;
    assert!(order >= 1, "order must be positive");
    let mut counts: Vec<BTreeMap<Vec<String>, u64>> = vec![BTreeMap::new(); order];
    for a in alphabet {
        counts[0].insert(vec![a.to_string()], 1);
    }
    for text in texts {
        let mut seq = vec!["<s>".to_string()];
        seq.extend(text.as_ref().chars().map(|c| if c == ' ' { "|".to_string() } else { c.to_string() }));
        for n in 1..=order {
            for win in seq.windows(n) {
                if n == 1 && win[0] == "<s>" {
                    continue;
                }
                *counts[n - 1].entry(win.to_vec()).or_insert(0) += 1;
            }
        }
    }
    let mut context_totals: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for table in &counts[1..] {
        for (g, c) in table {
            *context_totals.entry(g[..g.len() - 1].to_vec()).or_insert(0) += c;
        }
    }
    let unigram_total: u64 = counts[0].values().sum();

    let mut out = String::from("\\data\\\n");
    let sizes: Vec<usize> = counts
        .iter()
        .enumerate()
        .map(|(i, t)| t.len() + usize::from(i == 0))
        .collect();
    for (i, n) in sizes.iter().enumerate() {
        out.push_str(&format!("ngram {}={}\n", i + 1, n));
    }
    for (i, table) in counts.iter().enumerate() {
        out.push_str(&format!("\n\\{}-grams:\n", i + 1));
        let backoff = if i + 1 < order { "\t-0.3" } else { "" };
        if i == 0 {
            out.push_str(&format!("-99\t<s>{backoff}\n"));
        }
        for (g, &c) in table {
            let p = if i == 0 {
                (c as f64 / unigram_total as f64).log10()
            } else {
                (0.8 * c as f64 / context_totals[&g[..i]] as f64).log10()
            };
            out.push_str(&format!("{p:.6}\t{}{backoff}\n", g.join(" ")));
        }
    }
    out.push_str("\n\\end\\\n");
    out
}
