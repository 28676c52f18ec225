//! Backoff n-gram models read from ARPA text files.
//!
//! Probabilities are stored as parsed (log10) and converted to natural log at
//! the scoring boundary.

use rustc_hash::FxHashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

/// Highest n-gram order accepted by the loader.
pub const MAX_ORDER: usize = 16;

/// Natural-log score used for words outside the model when it has no `<unk>`.
pub const DEFAULT_OOV_FLOOR: f64 = -10.0;

#[derive(Debug, Error)]
pub enum ArpaError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{order}-gram count mismatch: header declares {declared}, section has {found}")]
    OrderMismatch {
        order: usize,
        declared: usize,
        found: usize,
    },
    #[error("n-gram {0:?} has no entry for its context")]
    MissingContext(String),
}

fn parse_err(line: usize, reason: impl Into<String>) -> ArpaError {
    ArpaError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Log10 probability and backoff weight of one n-gram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramEntry {
    pub log10_prob: f64,
    pub log10_backoff: f64,
}

/// Modelling unit of an n-gram model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Character,
    Word,
}

/// Context of an n-gram query.
///
/// Holds the longest suffix of the recent history (at most `order - 1`
/// words) that the model contains. Longer histories can neither start an
/// n-gram nor carry a backoff weight, so nothing is lost by forgetting them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NgramState(u32);

const ROOT: u32 = 0;

#[derive(Debug, Clone, Copy)]
struct Node {
    log10_prob: f64,
    log10_backoff: f64,
    /// Number of words in this n-gram; 0 for the root.
    depth: u32,
    /// Longest proper suffix present in the model.
    suffix: u32,
}

#[inline]
fn edge(parent: u32, word: u32) -> u64 {
    (u64::from(parent) << 32) | u64::from(word)
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    unit: Unit,
    ids: FxHashMap<String, u32>,
    /// Node 0 is the empty history; every n-gram is the child of its prefix.
    nodes: Vec<Node>,
    children: FxHashMap<u64, u32>,
    counts: Vec<usize>,
    unk: Option<u32>,
    bos: Option<u32>,
    oov_floor: f64,
}

impl NgramModel {
    pub fn load(path: impl AsRef<Path>, unit: Unit) -> Result<Self, ArpaError> {
        Self::from_reader(BufReader::new(File::open(path)?), unit)
    }

    pub fn from_arpa_str(text: &str, unit: Unit) -> Result<Self, ArpaError> {
        Self::from_reader(text.as_bytes(), unit)
    }

    pub fn from_reader<R: BufRead>(reader: R, unit: Unit) -> Result<Self, ArpaError> {
        #[derive(PartialEq)]
        enum Stage {
            Preamble,
            Header,
            Section(usize),
            Done,
        }
        let mut stage = Stage::Preamble;
        let mut declared: Vec<(usize, usize)> = Vec::new();
        let mut ids: FxHashMap<String, u32> = FxHashMap::default();
        let mut words: Vec<String> = Vec::new();
        let mut tables: Vec<FxHashMap<Box<[u32]>, NgramEntry>> = Vec::new();
        let mut seen_sections = vec![false; MAX_ORDER + 1];
        let mut last_line = 0;

        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            last_line = lineno;
            let line = line?;
            let trimmed = line.trim();
            match stage {
                Stage::Preamble => {
                    if trimmed == "\\data\\" {
                        stage = Stage::Header;
                    }
                }
                Stage::Header => {
                    if trimmed.is_empty() {
                        continue;
                    }
                    if let Some(rest) = trimmed.strip_prefix("ngram ") {
                        let (n, c) = rest
                            .split_once('=')
                            .ok_or_else(|| parse_err(lineno, "expected `ngram N=COUNT`"))?;
                        let n: usize = n
                            .trim()
                            .parse()
                            .map_err(|_| parse_err(lineno, "bad n-gram order"))?;
                        let c: usize = c
                            .trim()
                            .parse()
                            .map_err(|_| parse_err(lineno, "bad n-gram count"))?;
                        if n == 0 || n > MAX_ORDER {
                            return Err(parse_err(lineno, format!("unsupported order {n}")));
                        }
                        if n != declared.len() + 1 {
                            return Err(parse_err(lineno, "n-gram orders must be declared in sequence"));
                        }
                        declared.push((n, c));
                    } else if let Some(n) = section_order(trimmed) {
                        if declared.is_empty() {
                            return Err(parse_err(lineno, "empty \\data\\ section"));
                        }
                        tables = vec![FxHashMap::default(); declared.len()];
                        stage = Stage::Section(open_section(n, declared.len(), &mut seen_sections, lineno)?);
                    } else {
                        return Err(parse_err(lineno, format!("unexpected header line {trimmed:?}")));
                    }
                }
                Stage::Section(n) => {
                    if trimmed.is_empty() {
                        continue;
                    }
                    if trimmed == "\\end\\" {
                        stage = Stage::Done;
                        continue;
                    }
                    if let Some(m) = section_order(trimmed) {
                        stage = Stage::Section(open_section(m, declared.len(), &mut seen_sections, lineno)?);
                        continue;
                    }
                    let fields: Vec<&str> = trimmed.split_whitespace().collect();
                    let with_backoff = fields.len() == n + 2;
                    if fields.len() != n + 1 && !with_backoff {
                        return Err(parse_err(
                            lineno,
                            format!("expected {} or {} fields for a {n}-gram", n + 1, n + 2),
                        ));
                    }
                    let log10_prob = parse_prob(fields[0], lineno)?;
                    if log10_prob > 0.0 {
                        return Err(parse_err(lineno, "log10 probability above 0"));
                    }
                    let log10_backoff = if with_backoff {
                        parse_prob(fields[n + 1], lineno)?
                    } else {
                        0.0
                    };
                    let mut key = Vec::with_capacity(n);
                    for w in &fields[1..=n] {
                        let id = match ids.get(*w) {
                            Some(&id) => id,
                            None if n == 1 => {
                                let id = words.len() as u32;
                                ids.insert((*w).to_string(), id);
                                words.push((*w).to_string());
                                id
                            }
                            None => {
                                return Err(parse_err(lineno, format!("word {w:?} has no unigram")))
                            }
                        };
                        key.push(id);
                    }
                    let entry = NgramEntry {
                        log10_prob,
                        log10_backoff,
                    };
                    if tables[n - 1].insert(key.into_boxed_slice(), entry).is_some() {
                        return Err(parse_err(lineno, "duplicate n-gram"));
                    }
                }
                Stage::Done => {
                    if !trimmed.is_empty() {
                        return Err(parse_err(lineno, "content after \\end\\"));
                    }
                }
            }
        }

        match stage {
            Stage::Preamble => return Err(parse_err(last_line, "missing \\data\\ section")),
            Stage::Header if declared.is_empty() => {
                return Err(parse_err(last_line, "empty \\data\\ section"))
            }
            Stage::Done => {}
            _ => return Err(parse_err(last_line, "missing \\end\\ marker")),
        }

        for &(n, count) in &declared {
            let found = tables[n - 1].len();
            if found != count {
                return Err(ArpaError::OrderMismatch {
                    order: n,
                    declared: count,
                    found,
                });
            }
        }
        for n in 2..=declared.len() {
            for key in tables[n - 1].keys() {
                if !tables[n - 2].contains_key(&key[..n - 1]) {
                    let spelled: Vec<&str> = key.iter().map(|&id| words[id as usize].as_str()).collect();
                    return Err(ArpaError::MissingContext(spelled.join(" ")));
                }
            }
        }

        let unk = ids.get("<unk>").copied();
        let bos = ids.get("<s>").copied();
        let counts = tables.iter().map(|t| t.len()).collect();
        let (nodes, children) = link_nodes(tables);
        Ok(Self {
            order: declared.len(),
            unit,
            ids,
            nodes,
            children,
            counts,
            unk,
            bos,
            oov_floor: DEFAULT_OOV_FLOOR,
        })
    }

    /// Natural-log score for out-of-vocabulary words when `<unk>` is absent.
    pub fn with_oov_floor(mut self, floor: f64) -> Self {
        self.oov_floor = floor;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn oov_floor(&self) -> f64 {
        self.oov_floor
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    pub fn num_ngrams(&self, n: usize) -> usize {
        self.counts.get(n.wrapping_sub(1)).copied().unwrap_or(0)
    }

    /// Raw table lookup for a spelled n-gram.
    pub fn entry(&self, ngram: &[&str]) -> Option<NgramEntry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        let mut node = ROOT;
        for w in ngram {
            node = *self.children.get(&edge(node, self.word_id(w)?))?;
        }
        let n = &self.nodes[node as usize];
        Some(NgramEntry {
            log10_prob: n.log10_prob,
            log10_backoff: n.log10_backoff,
        })
    }

    /// Sentence-start context: `<s>` when the model has it.
    pub fn begin_state(&self) -> NgramState {
        match self.bos {
            Some(bos) if self.order > 1 => NgramState(self.children[&edge(ROOT, bos)]),
            _ => NgramState::default(),
        }
    }

    pub fn empty_state(&self) -> NgramState {
        NgramState::default()
    }

    /// Backoff-resolved log10 probability of `word` after `state`, and the
    /// state that follows.
    ///
    /// Walks the present suffixes of the history from longest to shortest,
    /// collecting backoff weights until `word` extends one of them.
    fn step(&self, state: NgramState, word: u32) -> (f64, NgramState) {
        let max_context = (self.order - 1) as u32;
        let mut backoff = 0.0;
        let mut prob = None;
        let mut node = state.0;
        loop {
            if let Some(&child) = self.children.get(&edge(node, word)) {
                let c = &self.nodes[child as usize];
                let p = *prob.get_or_insert(backoff + c.log10_prob);
                if c.depth <= max_context {
                    return (p, NgramState(child));
                }
            } else if prob.is_none() {
                backoff += self.nodes[node as usize].log10_backoff;
            }
            if node == ROOT {
                // every known word has a unigram, so `prob` is set here
                let p = prob.unwrap_or_else(|| unreachable!("word id {word} has no unigram"));
                return (p, NgramState(ROOT));
            }
            node = self.nodes[node as usize].suffix;
        }
    }

    /// Natural-log probability of `word` given `state`, and the advanced state.
    pub fn score(&self, state: &NgramState, word: &str) -> (f64, NgramState) {
        match self.word_id(word).or(self.unk) {
            Some(id) => {
                let (p, next) = self.step(*state, id);
                (p * std::f64::consts::LN_10, next)
            }
            // an unknown word breaks the history
            None => (self.oov_floor, NgramState(ROOT)),
        }
    }

    /// Log10 probability of `word` after the spelled `context`, oldest first.
    pub fn log10_prob(&self, context: &[&str], word: &str) -> Option<f64> {
        let id = self.word_id(word).or(self.unk)?;
        let state = context.iter().fold(NgramState(ROOT), |st, w| match self.word_id(w).or(self.unk) {
            Some(c) => self.step(st, c).1,
            None => NgramState(ROOT),
        });
        Some(self.step(state, id).0)
    }

    /// Sum of natural-log scores of `words` starting from `state`.
    pub fn score_sequence<'a>(
        &self,
        state: &NgramState,
        words: impl IntoIterator<Item = &'a str>,
    ) -> (f64, NgramState) {
        words
            .into_iter()
            .fold((0.0, *state), |(total, st), w| {
                let (d, next) = self.score(&st, w);
                (total + d, next)
            })
    }
}

/// Turns per-order tables into a tree of n-grams with suffix links.
fn link_nodes(tables: Vec<FxHashMap<Box<[u32]>, NgramEntry>>) -> (Vec<Node>, FxHashMap<u64, u32>) {
    let total: usize = tables.iter().map(|t| t.len()).sum();
    let mut nodes = Vec::with_capacity(total + 1);
    nodes.push(Node {
        log10_prob: 0.0,
        log10_backoff: 0.0,
        depth: 0,
        suffix: ROOT,
    });
    let mut children: FxHashMap<u64, u32> = FxHashMap::default();
    children.reserve(total);
    let find = |children: &FxHashMap<u64, u32>, key: &[u32]| -> Option<u32> {
        key.iter().try_fold(ROOT, |node, &w| children.get(&edge(node, w)).copied())
    };
    for table in tables {
        let mut entries: Vec<(Box<[u32]>, NgramEntry)> = table.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        for (key, e) in entries {
            let n = key.len();
            let parent = find(&children, &key[..n - 1]).expect("contexts were validated");
            // shorter n-grams are all linked already
            let suffix = (1..n)
                .find_map(|s| find(&children, &key[s..]))
                .unwrap_or(ROOT);
            let id = nodes.len() as u32;
            nodes.push(Node {
                log10_prob: e.log10_prob,
                log10_backoff: e.log10_backoff,
                depth: n as u32,
                suffix,
            });
            children.insert(edge(parent, key[n - 1]), id);
        }
    }
    (nodes, children)
}

fn section_order(line: &str) -> Option<usize> {
    line.strip_prefix('\\')?
        .strip_suffix("-grams:")?
        .parse()
        .ok()
}

fn open_section(n: usize, declared: usize, seen: &mut [bool], lineno: usize) -> Result<usize, ArpaError> {
    if n == 0 || n > declared {
        return Err(parse_err(lineno, format!("section for undeclared order {n}")));
    }
    if std::mem::replace(&mut seen[n], true) {
        return Err(parse_err(lineno, format!("repeated {n}-gram section")));
    }
    Ok(n)
}

fn parse_prob(field: &str, lineno: usize) -> Result<f64, ArpaError> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad number {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(lineno, format!("non-finite value {field:?}")));
    }
    Ok(v)
}
