//! Keyword boosting state carried by each beam.
//!
//! A beam walks the keyword tree as it emits tokens. Every edge taken below
//! the first one earns `+w_k`, accumulated as *pending* boost. Reaching a
//! keyword-complete node locks the pending amount in. Leaving the tree before
//! completion subtracts exactly what was pending, so an abandoned excursion
//! contributes nothing. Blank frames never touch this state.

use crate::trie::{KeywordTrie, NodeId};
use crate::vocab::{TokenId, Vocabulary};

/// Position of one hypothesis in the keyword tree plus its boost ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordCursor {
    pub node: NodeId,
    /// Boost earned on the current path since the last lock-in.
    pub pending: f64,
    /// Boost retained from completed keywords.
    pub locked: f64,
}

impl KeywordCursor {
    pub const START: KeywordCursor = KeywordCursor {
        node: NodeId::ROOT,
        pending: 0.0,
        locked: 0.0,
    };

    /// Net boost so far, equal to the sum of all deltas applied.
    pub fn total(&self) -> f64 {
        self.locked + self.pending
    }
}

impl Default for KeywordCursor {
    fn default() -> Self {
        Self::START
    }
}

/// Which branch of the node update was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The token continues the current path.
    Advance,
    /// The path broke but the token starts another keyword from the root.
    Reenter,
    /// The path broke and the beam is back at the root.
    Escape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeUpdate {
    pub cursor: KeywordCursor,
    pub delta: f64,
    pub branch: Branch,
    /// Keyword completed by this step, if any.
    pub completed: Option<usize>,
}

#[inline]
fn neg_pending(pending: f64) -> f64 {
    if pending == 0.0 {
        0.0
    } else {
        -pending
    }
}

/// Updates the tree position for an emitted non-blank, non-boundary token.
pub fn step_update_node(
    trie: &KeywordTrie,
    cursor: &KeywordCursor,
    token: TokenId,
    keyword_weight: f64,
) -> NodeUpdate {
    let (node, mut pending, delta, branch) = match trie.traverse(cursor.node, token) {
        Some(child) => {
            // the edge out of the root is never boosted
            let delta = if cursor.node.is_root() { 0.0 } else { keyword_weight };
            (child, cursor.pending + delta, delta, Branch::Advance)
        }
        None => {
            let delta = neg_pending(cursor.pending);
            match trie.traverse(NodeId::ROOT, token) {
                Some(child) => (child, 0.0, delta, Branch::Reenter),
                None => (NodeId::ROOT, 0.0, delta, Branch::Escape),
            }
        }
    };
    let mut locked = cursor.locked;
    let completed = trie.node(node).keyword_index;
    if completed.is_some() {
        locked += pending;
        pending = 0.0;
    }
    NodeUpdate {
        cursor: KeywordCursor {
            node,
            pending,
            locked,
        },
        delta,
        branch,
        completed,
    }
}

/// Word boundaries end any keyword in progress.
pub fn escape_at_boundary(cursor: &KeywordCursor) -> NodeUpdate {
    NodeUpdate {
        cursor: KeywordCursor {
            node: NodeId::ROOT,
            pending: 0.0,
            locked: cursor.locked,
        },
        delta: neg_pending(cursor.pending),
        branch: Branch::Escape,
        completed: None,
    }
}

/// Cursor transition for an emitted token, dispatching on boundary tokens.
pub fn advance(
    trie: &KeywordTrie,
    vocab: &Vocabulary,
    cursor: &KeywordCursor,
    token: TokenId,
    keyword_weight: f64,
) -> NodeUpdate {
    debug_assert_ne!(token, vocab.blank());
    if vocab.is_boundary(token) {
        escape_at_boundary(cursor)
    } else {
        step_update_node(trie, cursor, token, keyword_weight)
    }
}

/// Keyword score `K(s)` for every vocabulary token, given the beam's cursor.
///
/// Children of a non-root node get `+w_k`; any other emitted token gets
/// `-pending`. Blank is always 0, and everything is 0 at the root.
pub fn keyword_scores(
    trie: &KeywordTrie,
    vocab: &Vocabulary,
    cursor: &KeywordCursor,
    keyword_weight: f64,
) -> Vec<f64> {
    let mut table = vec![0.0; vocab.len()];
    if cursor.node.is_root() {
        return table;
    }
    for (i, slot) in table.iter_mut().enumerate() {
        let tok = TokenId(i as u32);
        if tok != vocab.blank() {
            *slot = advance(trie, vocab, cursor, tok, keyword_weight).delta;
        }
    }
    table
}

/// Cursor reached by walking `tokens` from the start state.
pub fn replay(
    trie: &KeywordTrie,
    vocab: &Vocabulary,
    tokens: &[TokenId],
    keyword_weight: f64,
) -> KeywordCursor {
    tokens.iter().fold(KeywordCursor::START, |c, &t| {
        advance(trie, vocab, &c, t, keyword_weight).cursor
    })
}
