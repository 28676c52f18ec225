use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// A run of `length` equal items at `ref_start` and `hyp_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingBlock {
    pub ref_start: usize,
    pub hyp_start: usize,
    pub length: usize,
}

impl MatchingBlock {
    pub fn ref_range(&self) -> std::ops::Range<usize> {
        self.ref_start..self.ref_start + self.length
    }

    pub fn hyp_range(&self) -> std::ops::Range<usize> {
        self.hyp_start..self.hyp_start + self.length
    }
}

/// Longest common contiguous run inside the given windows.
///
/// Among equally long runs the one starting earliest in `a` wins, then the
/// one starting earliest in `b`.
fn longest_match<T: Eq + Hash>(
    a: &[T],
    b2j: &HashMap<&T, Vec<usize>>,
    (alo, ahi): (usize, usize),
    (blo, bhi): (usize, usize),
) -> MatchingBlock {
    let mut best = MatchingBlock {
        ref_start: alo,
        hyp_start: blo,
        length: 0,
    };
    // run length ending at b[j], for the previous row of a
    let mut j2len: HashMap<usize, usize> = HashMap::new();
    for (i, item) in a.iter().enumerate().take(ahi).skip(alo) {
        let mut next: HashMap<usize, usize> = HashMap::new();
        if let Some(js) = b2j.get(item) {
            for &j in js {
                if j < blo {
                    continue;
                }
                if j >= bhi {
                    break;
                }
                let k = if j > 0 { j2len.get(&(j - 1)).copied().unwrap_or(0) } else { 0 } + 1;
                next.insert(j, k);
                if k > best.length {
                    best = MatchingBlock {
                        ref_start: i + 1 - k,
                        hyp_start: j + 1 - k,
                        length: k,
                    };
                }
            }
        }
        j2len = next;
    }
    best
}

/// Matching blocks between two sequences by longest-match recursion.
///
/// Blocks come back ordered and non-overlapping in both sequences; touching
/// blocks are merged. There is no junk filtering.
pub fn matching_blocks<T: Eq + Hash>(reference: &[T], hypothesis: &[T]) -> Vec<MatchingBlock> {
    let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, item) in hypothesis.iter().enumerate() {
        b2j.entry(item).or_default().push(j);
    }
    let mut found = Vec::new();
    let mut stack = vec![((0, reference.len()), (0, hypothesis.len()))];
    while let Some(((alo, ahi), (blo, bhi))) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let m = longest_match(reference, &b2j, (alo, ahi), (blo, bhi));
        if m.length == 0 {
            continue;
        }
        found.push(m);
        stack.push(((alo, m.ref_start), (blo, m.hyp_start)));
        stack.push(((m.ref_start + m.length, ahi), (m.hyp_start + m.length, bhi)));
    }
    found.sort_by_key(|m| (m.ref_start, m.hyp_start));

    let mut merged: Vec<MatchingBlock> = Vec::with_capacity(found.len());
    for m in found {
        match merged.last_mut() {
            Some(last)
                if last.ref_start + last.length == m.ref_start
                    && last.hyp_start + last.length == m.hyp_start =>
            {
                last.length += m.length
            }
            _ => merged.push(m),
        }
    }
    merged
}

/// Plain-text rendering of the blocks, one per line.
pub fn dump_blocks<S: AsRef<str>>(reference: &[S], blocks: &[MatchingBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        let words: Vec<&str> = reference[b.ref_range()].iter().map(AsRef::as_ref).collect();
        out.push_str(&format!(
            "ref[{}..{}] hyp[{}..{}] {}\n",
            b.ref_start,
            b.ref_start + b.length,
            b.hyp_start,
            b.hyp_start + b.length,
            words.join(" ")
        ));
    }
    out
}
