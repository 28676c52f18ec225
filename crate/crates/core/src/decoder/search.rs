use std::cmp::Ordering;
use rustc_hash::FxHashMap as HashMap;

use super::boost::{self, KeywordCursor};
use super::{DecoderConfig, Hypothesis};
use crate::emissions::{log_add, EmissionMatrix};
use crate::lm::{LmScorer, LmState};
use crate::trie::KeywordTrie;
use crate::vocab::{TokenId, Vocabulary};

const ROOT: u32 = 0;

/// A collapsed output prefix. Everything here is a function of the token
/// sequence alone, so merged alignments share one node.
#[derive(Debug, Clone)]
struct PrefixNode {
    parent: u32,
    token: Option<TokenId>,
    words: u32,
    cursor: KeywordCursor,
    boost_total: f64,
    lm_state: LmState,
    lm_total: f64,
}

#[derive(Debug, Clone, Copy)]
struct Beam {
    node: u32,
    logp_blank: f64,
    logp_nonblank: f64,
}

/// Either an arena node or an index into the step's pending nodes.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Existing(u32),
    New(u32),
}

#[derive(Debug)]
struct Candidate {
    slot: Slot,
    logp_blank: f64,
    logp_nonblank: f64,
}

struct Ranked {
    index: usize,
    am: f64,
    total: f64,
}

pub(super) struct PrefixSearch<'a> {
    vocab: &'a Vocabulary,
    trie: Option<&'a KeywordTrie>,
    lm: Option<&'a dyn LmScorer>,
    config: &'a DecoderConfig,
    arena: Vec<PrefixNode>,
    children: HashMap<(u32, TokenId), u32>,
    /// Extensions created during the current step; only survivors move
    /// into the arena.
    pending: Vec<PrefixNode>,
}

impl<'a> PrefixSearch<'a> {
    pub(super) fn new(
        vocab: &'a Vocabulary,
        trie: Option<&'a KeywordTrie>,
        lm: Option<&'a dyn LmScorer>,
        config: &'a DecoderConfig,
    ) -> Self {
        let root = PrefixNode {
            parent: ROOT,
            token: None,
            words: 0,
            cursor: KeywordCursor::START,
            boost_total: 0.0,
            lm_state: lm.map(|l| l.initial_state()).unwrap_or_default(),
            lm_total: 0.0,
        };
        Self {
            vocab,
            trie,
            lm,
            config,
            arena: vec![root],
            children: HashMap::default(),
            pending: Vec::new(),
        }
    }

    pub(super) fn run(mut self, emissions: &EmissionMatrix) -> Vec<Hypothesis> {
        let mut beams = vec![Beam {
            node: ROOT,
            logp_blank: 0.0,
            logp_nonblank: f64::NEG_INFINITY,
        }];
        let mut active: Vec<(TokenId, f64)> = Vec::with_capacity(self.vocab.len());
        for row in emissions.rows() {
            active.clear();
            let cutoff = match self.config.prune_logp_threshold {
                Some(th) => row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64 - th,
                None => f64::NEG_INFINITY,
            };
            active.extend(
                row.iter()
                    .enumerate()
                    .map(|(i, &lp)| (TokenId(i as u32), lp as f64))
                    .filter(|&(_, lp)| lp >= cutoff),
            );
            beams = self.step(&beams, &active);
        }
        let n = self.config.nbest.max(1).min(beams.len());
        beams[..n].iter().map(|b| self.hypothesis(b)).collect()
    }

    fn step(&mut self, beams: &[Beam], active: &[(TokenId, f64)]) -> Vec<Beam> {
        let blank = self.vocab.blank();
        let mut cands: Vec<Candidate> = Vec::with_capacity(beams.len() * 2);
        let mut existing: HashMap<u32, usize> = HashMap::with_capacity_and_hasher(beams.len() * 2, Default::default());
        let mut fresh: HashMap<(u32, TokenId), usize> =
            HashMap::with_capacity_and_hasher(beams.len() * active.len(), Default::default());
        self.pending.clear();

        for beam in beams {
            let total = log_add(beam.logp_blank, beam.logp_nonblank);
            let last = self.arena[beam.node as usize].token;
            for &(tok, lp) in active {
                if tok == blank {
                    let i = slot_existing(&mut cands, &mut existing, beam.node);
                    cands[i].logp_blank = log_add(cands[i].logp_blank, total + lp);
                } else if Some(tok) == last {
                    let i = slot_existing(&mut cands, &mut existing, beam.node);
                    cands[i].logp_nonblank = log_add(cands[i].logp_nonblank, beam.logp_nonblank + lp);
                    if beam.logp_blank > f64::NEG_INFINITY {
                        let j = self.slot_child(&mut cands, &mut existing, &mut fresh, beam.node, tok);
                        cands[j].logp_nonblank =
                            log_add(cands[j].logp_nonblank, beam.logp_blank + lp);
                    }
                } else {
                    let j = self.slot_child(&mut cands, &mut existing, &mut fresh, beam.node, tok);
                    cands[j].logp_nonblank = log_add(cands[j].logp_nonblank, total + lp);
                }
            }
        }

        let mut ranked: Vec<Ranked> = cands
            .iter()
            .enumerate()
            .filter_map(|(index, c)| {
                let am = log_add(c.logp_blank, c.logp_nonblank);
                if am == f64::NEG_INFINITY {
                    return None;
                }
                let node = self.slot_node(c.slot);
                Some(Ranked {
                    index,
                    am,
                    total: self.combine(am, node),
                })
            })
            .collect();

        let keep = self.config.beam_width.min(ranked.len());
        let cmp = |a: &Ranked, b: &Ranked| self.rank_order(&cands, a, b);
        if keep < ranked.len() {
            ranked.select_nth_unstable_by(keep, cmp);
            ranked.truncate(keep);
        }
        ranked.sort_unstable_by(cmp);

        ranked
            .iter()
            .map(|r| {
                let cand = &cands[r.index];
                let node = match cand.slot {
                    Slot::Existing(id) => id,
                    Slot::New(i) => {
                        let node = self.pending[i as usize].clone();
                        self.insert(node)
                    }
                };
                Beam {
                    node,
                    logp_blank: cand.logp_blank,
                    logp_nonblank: cand.logp_nonblank,
                }
            })
            .collect()
    }

    #[inline]
    fn combine(&self, am: f64, node: &PrefixNode) -> f64 {
        am + self.config.lm_weight * node.lm_total
            + node.boost_total
            + self.config.length_bonus * node.words as f64
    }

    /// Higher total first, then higher acoustic score, then the
    /// lexicographically smaller token sequence.
    fn rank_order(&self, cands: &[Candidate], a: &Ranked, b: &Ranked) -> Ordering {
        b.total
            .total_cmp(&a.total)
            .then_with(|| b.am.total_cmp(&a.am))
            .then_with(|| {
                self.slot_tokens(&cands[a.index].slot)
                    .cmp(&self.slot_tokens(&cands[b.index].slot))
            })
    }

    fn slot_node(&self, slot: Slot) -> &PrefixNode {
        match slot {
            Slot::Existing(id) => &self.arena[id as usize],
            Slot::New(i) => &self.pending[i as usize],
        }
    }

    fn slot_tokens(&self, slot: &Slot) -> Vec<TokenId> {
        match *slot {
            Slot::Existing(id) => self.tokens_of(id),
            Slot::New(i) => {
                let node = &self.pending[i as usize];
                let mut t = self.tokens_of(node.parent);
                t.extend(node.token);
                t
            }
        }
    }

    fn tokens_of(&self, mut id: u32) -> Vec<TokenId> {
        let mut out = Vec::new();
        while id != ROOT {
            let n = &self.arena[id as usize];
            out.extend(n.token);
            id = n.parent;
        }
        out.reverse();
        out
    }

    fn slot_child(
        &mut self,
        cands: &mut Vec<Candidate>,
        existing: &mut HashMap<u32, usize>,
        fresh: &mut HashMap<(u32, TokenId), usize>,
        parent: u32,
        tok: TokenId,
    ) -> usize {
        if let Some(&id) = self.children.get(&(parent, tok)) {
            return slot_existing(cands, existing, id);
        }
        if let Some(&i) = fresh.get(&(parent, tok)) {
            return i;
        }
        let node = self.extend(parent, tok);
        self.pending.push(node);
        let slot = Slot::New((self.pending.len() - 1) as u32);
        *fresh.entry((parent, tok)).or_insert_with(|| {
            cands.push(Candidate {
                slot,
                logp_blank: f64::NEG_INFINITY,
                logp_nonblank: f64::NEG_INFINITY,
            });
            cands.len() - 1
        })
    }

    /// State of `parent + tok`: LM increment, keyword transition, word count.
    fn extend(&self, parent: u32, tok: TokenId) -> PrefixNode {
        let p = &self.arena[parent as usize];
        let is_boundary = self.vocab.is_boundary(tok);
        let (lm_state, lm_total) = match self.lm {
            Some(lm) => {
                let (delta, state) = lm.score(&p.lm_state, self.vocab.token(tok), is_boundary);
                (state, p.lm_total + delta)
            }
            None => (LmState::default(), 0.0),
        };
        let (cursor, boost_total) = match self.trie {
            Some(trie) => {
                let up = boost::advance(trie, self.vocab, &p.cursor, tok, self.config.keyword_weight);
                (up.cursor, p.boost_total + up.delta)
            }
            None => (p.cursor, p.boost_total),
        };
        let starts_word = !is_boundary && p.token.is_none_or(|t| self.vocab.is_boundary(t));
        PrefixNode {
            parent,
            token: Some(tok),
            words: p.words + u32::from(starts_word),
            cursor,
            boost_total,
            lm_state,
            lm_total,
        }
    }

    fn insert(&mut self, node: PrefixNode) -> u32 {
        let id = self.arena.len() as u32;
        let key = (node.parent, node.token.expect("only the root lacks a token"));
        self.arena.push(node);
        self.children.insert(key, id);
        #[cfg(debug_assertions)]
        self.check_cursor(id);
        id
    }

    /// The tree position must follow from the current word alone.
    #[cfg(debug_assertions)]
    fn check_cursor(&self, id: u32) {
        let Some(trie) = self.trie else { return };
        let mut word = Vec::new();
        let mut at = id;
        while let Some(t) = self.arena[at as usize].token.filter(|&t| !self.vocab.is_boundary(t)) {
            word.push(t);
            at = self.arena[at as usize].parent;
        }
        word.reverse();
        let replayed = boost::replay(trie, self.vocab, &word, self.config.keyword_weight);
        let cursor = self.arena[id as usize].cursor;
        debug_assert_eq!(cursor.node, replayed.node);
        debug_assert_eq!(cursor.pending, replayed.pending);
    }

    fn hypothesis(&self, beam: &Beam) -> Hypothesis {
        let node = &self.arena[beam.node as usize];
        let am = log_add(beam.logp_blank, beam.logp_nonblank);
        let tokens = self.tokens_of(beam.node);
        Hypothesis {
            transcript: self.vocab.render(&tokens),
            tokens,
            score_total: self.combine(am, node),
            score_am: am,
            score_lm: node.lm_total,
            score_boost: node.boost_total,
            score_length: self.config.length_bonus * node.words as f64,
            words: node.words as usize,
        }
    }
}

fn slot_existing(cands: &mut Vec<Candidate>, existing: &mut HashMap<u32, usize>, id: u32) -> usize {
    *existing.entry(id).or_insert_with(|| {
        cands.push(Candidate {
            slot: Slot::Existing(id),
            logp_blank: f64::NEG_INFINITY,
            logp_nonblank: f64::NEG_INFINITY,
        });
        cands.len() - 1
    })
}
