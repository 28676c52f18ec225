//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the decoder, the n-gram model or the metrics
//! code; each routine is the plain textbook version of what it checks.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{HashMap, HashSet};

use kbdecode::emissions::log_softmax;
use kbdecode::{EmissionMatrix, Vocabulary};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const LN_10: f64 = std::f64::consts::LN_10;

/// Blank, boundary, then `size - 2` letters and digits.
pub fn small_vocab(size: usize) -> Vocabulary {
    assert!((2..=38).contains(&size));
    let mut toks = vec!["_".to_string(), "|".to_string()];
    toks.extend(('a'..='z').chain('0'..='9').take(size - 2).map(String::from));
    Vocabulary::with_defaults(toks).unwrap()
}

/// Blank plus `size - 1` letters and no word boundary.
pub fn letters_only_vocab(size: usize) -> Vocabulary {
    let mut toks = vec!["_".to_string()];
    toks.extend(('a'..='z').take(size - 1).map(String::from));
    Vocabulary::new(toks, kbdecode::TokenId(0), None).unwrap()
}

/// Normalized random frames; `scale` sets how peaked they are.
pub fn random_emissions<R: Rng>(rng: &mut R, frames: usize, vocab: usize, scale: f64) -> EmissionMatrix {
    let normal = Normal::new(0.0, scale).unwrap();
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| log_softmax(&(0..vocab).map(|_| normal.sample(rng)).collect::<Vec<_>>()))
        .collect();
    EmissionMatrix::from_rows_f64(&rows).unwrap()
}

/// Rows as the decoder sees them (stored `f32`, widened).
pub fn rows_f64(em: &EmissionMatrix) -> Vec<Vec<f64>> {
    em.rows().map(|r| r.iter().map(|&x| x as f64).collect()).collect()
}

pub fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn lse_all(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// CTC

/// Exact log-probability of every collapsed output, by enumerating all
/// `V^T` alignments.
pub fn ctc_brute_force(rows: &[Vec<f64>], blank: u32) -> HashMap<Vec<u32>, f64> {
    let t = rows.len();
    let v = rows.first().map_or(0, Vec::len);
    let mut paths: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
    let mut align = vec![0usize; t];
    loop {
        let logp: f64 = align.iter().enumerate().map(|(f, &k)| rows[f][k]).sum();
        let mut out = Vec::new();
        let mut prev = None;
        for &k in &align {
            let k = k as u32;
            if Some(k) != prev && k != blank {
                out.push(k);
            }
            prev = Some(k);
        }
        paths.entry(out).or_default().push(logp);
        // odometer
        let mut i = 0;
        while i < t {
            align[i] += 1;
            if align[i] < v {
                break;
            }
            align[i] = 0;
            i += 1;
        }
        if i == t {
            break;
        }
    }
    paths.into_iter().map(|(k, v)| (k, lse_all(&v))).collect()
}

/// Textbook CTC prefix beam search with no LM and no keyword logic.
///
/// Beams are ranked by acoustic score, ties broken by the smaller token
/// sequence. Returns `(tokens, logp_blank, logp_nonblank)` best first.
pub fn reference_prefix_beam(
    rows: &[Vec<f64>],
    blank: u32,
    beam_width: usize,
    prune: Option<f64>,
) -> Vec<(Vec<u32>, f64, f64)> {
    let mut beams: Vec<(Vec<u32>, f64, f64)> = vec![(Vec::new(), 0.0, f64::NEG_INFINITY)];
    for row in rows {
        let cutoff = match prune {
            Some(th) => row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - th,
            None => f64::NEG_INFINITY,
        };
        let mut next: HashMap<Vec<u32>, (f64, f64)> = HashMap::new();
        for (prefix, pb, pnb) in &beams {
            let total = lse(*pb, *pnb);
            for (k, &lp) in row.iter().enumerate() {
                if lp < cutoff {
                    continue;
                }
                let k = k as u32;
                if k == blank {
                    let e = next.entry(prefix.clone()).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                    e.0 = lse(e.0, total + lp);
                    continue;
                }
                let mut ext = prefix.clone();
                ext.push(k);
                if prefix.last() == Some(&k) {
                    let e = next.entry(prefix.clone()).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                    e.1 = lse(e.1, pnb + lp);
                    if *pb > f64::NEG_INFINITY {
                        let e = next.entry(ext).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                        e.1 = lse(e.1, pb + lp);
                    }
                } else {
                    let e = next.entry(ext).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                    e.1 = lse(e.1, total + lp);
                }
            }
        }
        let mut ranked: Vec<(Vec<u32>, f64, f64, f64)> = next
            .into_iter()
            .map(|(p, (b, nb))| {
                let am = lse(b, nb);
                (p, b, nb, am)
            })
            .filter(|x| x.3 > f64::NEG_INFINITY)
            .collect();
        ranked.sort_by(|a, b| b.3.total_cmp(&a.3).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(beam_width);
        beams = ranked.into_iter().map(|(p, b, nb, _)| (p, b, nb)).collect();
    }
    beams
}

// ---------------------------------------------------------------------------
// Keyword boost

/// Boost of a token string computed from the keyword spellings directly.
///
/// Each symbol continuing a keyword prefix earns `w` except the first of a
/// path. Breaking off returns what the path earned since its last complete
/// keyword; a boundary symbol always breaks off.
pub struct BoostSim {
    prefixes: HashSet<String>,
    complete: HashSet<String>,
    pub w: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BoostTrace {
    pub total: f64,
    pub deltas: Vec<f64>,
    /// Sum of deltas of each abandoned excursion, including the step that
    /// abandoned it.
    pub abandoned: Vec<f64>,
    /// Length of the longest keyword completed on each path that completed one.
    pub completions: Vec<usize>,
    pub pending: f64,
}

impl BoostSim {
    pub fn new<S: AsRef<str>>(keywords: &[S], w: f64) -> Self {
        let mut prefixes = HashSet::new();
        let mut complete = HashSet::new();
        for k in keywords {
            let k = k.as_ref();
            let chars: Vec<char> = k.chars().collect();
            for n in 1..=chars.len() {
                prefixes.insert(chars[..n].iter().collect::<String>());
            }
            complete.insert(k.to_string());
        }
        Self { prefixes, complete, w }
    }

    pub fn run(&self, symbols: &[&str], boundary: Option<&str>) -> BoostTrace {
        let mut tr = BoostTrace::default();
        let mut path = String::new();
        let mut pending = 0.0;
        let mut excursion = 0.0;
        let mut best_completion = 0;
        let close_path = |tr: &mut BoostTrace, best: &mut usize| {
            if *best > 0 {
                tr.completions.push(*best);
            }
            *best = 0;
        };
        for &s in symbols {
            let delta;
            if Some(s) == boundary {
                delta = if pending == 0.0 { 0.0 } else { -pending };
                if !path.is_empty() {
                    tr.abandoned.push(excursion + delta);
                }
                path.clear();
                pending = 0.0;
                excursion = 0.0;
                close_path(&mut tr, &mut best_completion);
            } else {
                let extended = format!("{path}{s}");
                if self.prefixes.contains(&extended) {
                    delta = if path.is_empty() { 0.0 } else { self.w };
                    path = extended;
                    pending += delta;
                    excursion += delta;
                } else {
                    delta = if pending == 0.0 { 0.0 } else { -pending };
                    if !path.is_empty() {
                        tr.abandoned.push(excursion + delta);
                    }
                    close_path(&mut tr, &mut best_completion);
                    pending = 0.0;
                    excursion = 0.0;
                    path = if self.prefixes.contains(s) { s.to_string() } else { String::new() };
                }
                if self.complete.contains(&path) {
                    pending = 0.0;
                    excursion = 0.0;
                    best_completion = path.chars().count();
                }
            }
            tr.total += delta;
            tr.deltas.push(delta);
        }
        close_path(&mut tr, &mut best_completion);
        tr.pending = pending;
        tr
    }
}

/// Number of maximal runs of non-boundary symbols.
pub fn word_count(symbols: &[&str], boundary: Option<&str>) -> usize {
    let mut words = 0;
    let mut inside = false;
    for &s in symbols {
        let b = Some(s) == boundary;
        if !b && !inside {
            words += 1;
        }
        inside = !b;
    }
    words
}

// ---------------------------------------------------------------------------
// N-gram backoff

/// ARPA tables kept as plain string maps.
#[derive(Debug, Clone)]
pub struct NaiveArpa {
    pub order: usize,
    /// `tables[n-1]` maps an n-gram to `(log10 prob, log10 backoff)`.
    pub tables: Vec<HashMap<Vec<String>, (f64, f64)>>,
    pub text: String,
}

impl NaiveArpa {
    pub fn has_word(&self, w: &str) -> bool {
        self.tables[0].contains_key(&vec![w.to_string()])
    }

    /// Maps unknown words to `<unk>` when the model has it.
    pub fn canonical(&self, w: &str) -> Option<String> {
        if self.has_word(w) {
            Some(w.to_string())
        } else if self.has_word("<unk>") {
            Some("<unk>".to_string())
        } else {
            None
        }
    }

    /// Backoff recursion on an already canonical, in-model history.
    pub fn log10_prob(&self, history: &[String], word: &str) -> f64 {
        let keep = history.len().min(self.order - 1);
        let ctx = &history[history.len() - keep..];
        self.backoff(ctx, word)
    }

    fn backoff(&self, ctx: &[String], word: &str) -> f64 {
        let mut gram = ctx.to_vec();
        gram.push(word.to_string());
        if let Some(&(p, _)) = self.tables[gram.len() - 1].get(&gram) {
            return p;
        }
        assert!(!ctx.is_empty(), "word {word:?} has no unigram");
        let bow = self.tables[ctx.len() - 1].get(ctx).map_or(0.0, |e| e.1);
        bow + self.backoff(&ctx[1..], word)
    }

    /// Natural-log scores of `words` one at a time; unknown words score
    /// `oov_floor` and clear the history.
    pub fn score_words(&self, start: &[&str], words: &[&str], oov_floor: f64) -> Vec<f64> {
        let mut hist: Vec<String> = start.iter().map(|s| s.to_string()).collect();
        words
            .iter()
            .map(|w| match self.canonical(w) {
                Some(c) => {
                    let p = self.log10_prob(&hist, &c) * LN_10;
                    hist.push(c);
                    p
                }
                None => {
                    hist.clear();
                    oov_floor
                }
            })
            .collect()
    }
}

fn fmt_logp(x: f64) -> (String, f64) {
    let s = format!("{x:.4}");
    let v = s.parse().unwrap();
    (s, v)
}

/// Random but well-formed ARPA model over `words`: every n-gram's prefix is
/// present, and some entries carry backoff weights.
pub fn random_arpa<R: Rng>(rng: &mut R, words: &[&str], order: usize, with_bos: bool) -> NaiveArpa {
    let mut tables: Vec<HashMap<Vec<String>, (f64, f64)>> = vec![HashMap::new(); order];
    let mut lines: Vec<Vec<String>> = vec![Vec::new(); order];
    let mut vocab: Vec<String> = words.iter().map(|s| s.to_string()).collect();
    if with_bos {
        vocab.push("<s>".to_string());
    }
    let mut add = |n: usize, gram: Vec<String>, rng: &mut R, tables: &mut Vec<HashMap<Vec<String>, (f64, f64)>>| {
        if tables[n - 1].contains_key(&gram) {
            return;
        }
        let (ps, p) = if gram.last().map(String::as_str) == Some("<s>") {
            ("-99".to_string(), -99.0)
        } else {
            fmt_logp(rng.gen_range(-3.0..-0.05))
        };
        let (bs, b) = if n < order && rng.gen_bool(0.7) {
            let (s, v) = fmt_logp(rng.gen_range(-1.5..0.0));
            (Some(s), v)
        } else {
            (None, 0.0)
        };
        let mut line = format!("{ps}\t{}", gram.join(" "));
        if let Some(bs) = bs {
            line.push('\t');
            line.push_str(&bs);
        }
        lines[n - 1].push(line);
        tables[n - 1].insert(gram, (p, b));
    };
    for w in &vocab {
        add(1, vec![w.clone()], rng, &mut tables);
    }
    for n in 2..=order {
        let prefixes: Vec<Vec<String>> = tables[n - 2].keys().cloned().collect();
        let mut prefixes = prefixes;
        prefixes.sort();
        let target = rng.gen_range(1..=prefixes.len() * 2);
        for _ in 0..target {
            let mut g = prefixes[rng.gen_range(0..prefixes.len())].clone();
            let next = &words[rng.gen_range(0..words.len())];
            g.push(next.to_string());
            add(n, g, rng, &mut tables);
        }
    }
    let mut text = String::from("\\data\\\n");
    for (n, t) in tables.iter().enumerate() {
        text.push_str(&format!("ngram {}={}\n", n + 1, t.len()));
    }
    for (n, l) in lines.iter().enumerate() {
        text.push_str(&format!("\n\\{}-grams:\n", n + 1));
        for line in l {
            text.push_str(line);
            text.push('\n');
        }
    }
    text.push_str("\n\\end\\\n");
    NaiveArpa { order, tables, text }
}

// ---------------------------------------------------------------------------
// Sequence metrics

/// Full-matrix Levenshtein distance.
pub fn dp_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// `(ref_start, hyp_start, len)` blocks by exhaustive longest-block search,
/// leftmost in the reference, then leftmost in the hypothesis, recursing on
/// both sides, with touching blocks joined.
pub fn brute_blocks<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize, usize)> {
    fn rec<T: PartialEq>(a: &[T], b: &[T], ao: usize, bo: usize, out: &mut Vec<(usize, usize, usize)>) {
        let mut best = (0, 0, 0);
        for i in 0..a.len() {
            for j in 0..b.len() {
                let mut k = 0;
                while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                    k += 1;
                }
                if k > best.2 {
                    best = (i, j, k);
                }
            }
        }
        let (i, j, k) = best;
        if k == 0 {
            return;
        }
        rec(&a[..i], &b[..j], ao, bo, out);
        out.push((ao + i, bo + j, k));
        rec(&a[i + k..], &b[j + k..], ao + i + k, bo + j + k, out);
    }
    let mut raw = Vec::new();
    rec(a, b, 0, 0, &mut raw);
    let mut merged: Vec<(usize, usize, usize)> = Vec::new();
    for blk in raw {
        match merged.last_mut() {
            Some(last) if last.0 + last.2 == blk.0 && last.1 + last.2 == blk.1 => last.2 += blk.2,
            _ => merged.push(blk),
        }
    }
    merged
}
