//! Keyword prefix tree over vocabulary tokens.
//!
//! Each node holds the token on its incoming edge and, when the path from the
//! root spells a complete keyword, that keyword's index. The tree is immutable
//! once built and can be shared between any number of concurrent decodes.

use rustc_hash::FxHashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrieError {
    #[error("keyword {keyword:?} contains {ch:?}, which is not a vocabulary token")]
    UnknownToken { keyword: String, ch: char },
    #[error("empty keyword")]
    EmptyKeyword,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn is_root(self) -> bool {
        self == Self::ROOT
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrieNode {
    /// Token on the edge into this node; `None` only for the root.
    pub token: Option<TokenId>,
    /// Index of the keyword spelled by the root-to-node path, if complete.
    pub keyword_index: Option<usize>,
    pub children: FxHashMap<TokenId, NodeId>,
    pub depth: u32,
}

impl TrieNode {
    fn root() -> Self {
        Self {
            token: None,
            keyword_index: None,
            children: FxHashMap::default(),
            depth: 0,
        }
    }

    /// Keyword index with `-1` for non-keyword nodes.
    pub fn keyword_index_or_neg(&self) -> i64 {
        self.keyword_index.map_or(-1, |i| i as i64)
    }

    pub fn is_keyword_end(&self) -> bool {
        self.keyword_index.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordTrie {
    nodes: Vec<TrieNode>,
    keywords: Vec<String>,
    alphabet: Vec<String>,
}

impl KeywordTrie {
    /// Builds the tree from keywords spelled one character per token.
    ///
    /// Keywords are folded to the vocabulary's letter case. Duplicates collapse
    /// onto one node and indices follow first-seen order.
    pub fn build<I, S>(keywords: I, vocab: &Vocabulary) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut trie = Self {
            nodes: vec![TrieNode::root()],
            keywords: Vec::new(),
            alphabet: vocab.tokens().to_vec(),
        };
        for kw in keywords {
            trie.insert(kw.as_ref(), vocab)?;
        }
        Ok(trie)
    }

    /// Like [`KeywordTrie::build`] but drops single-character entries, as
    /// keyword list files are expected to.
    pub fn build_from_list<I, S>(keywords: I, vocab: &Vocabulary) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let kept: Vec<S> = keywords
            .into_iter()
            .filter(|k| k.as_ref().trim().chars().count() > 1)
            .collect();
        Self::build(kept, vocab)
    }

    fn insert(&mut self, keyword: &str, vocab: &Vocabulary) -> Result<(), TrieError> {
        let keyword = vocab.normalize_case(keyword.trim());
        if keyword.is_empty() {
            return Err(TrieError::EmptyKeyword);
        }
        let tokens = keyword
            .chars()
            .map(|ch| {
                vocab.char_id(ch).ok_or_else(|| TrieError::UnknownToken {
                    keyword: keyword.clone(),
                    ch,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut cur = NodeId::ROOT;
        for tok in tokens {
            cur = match self.traverse(cur, tok) {
                Some(next) => next,
                None => {
                    let id = NodeId(self.nodes.len() as u32);
                    let depth = self.nodes[cur.0 as usize].depth + 1;
                    self.nodes.push(TrieNode {
                        token: Some(tok),
                        keyword_index: None,
                        children: FxHashMap::default(),
                        depth,
                    });
                    self.nodes[cur.0 as usize].children.insert(tok, id);
                    id
                }
            };
        }
        let node = &mut self.nodes[cur.0 as usize];
        if node.keyword_index.is_none() {
            node.keyword_index = Some(self.keywords.len());
            self.keywords.push(keyword);
        }
        Ok(())
    }

    pub fn root(&self) -> &TrieNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &TrieNode {
        &self.nodes[id.0 as usize]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    /// Token strings of the vocabulary the keywords were spelled with.
    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    /// Child of `node` along `token`, in constant time.
    #[inline]
    pub fn traverse(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        self.nodes[node.0 as usize].children.get(&token).copied()
    }

    /// Tokens that continue a keyword from `node`, in ascending id order.
    pub fn boosted_tokens(&self, node: NodeId) -> Vec<TokenId> {
        let mut toks: Vec<TokenId> = self.node(node).children.keys().copied().collect();
        toks.sort_unstable();
        toks
    }

    /// Follows `tokens` from the root; `None` as soon as the path leaves the tree.
    pub fn walk(&self, tokens: &[TokenId]) -> Option<NodeId> {
        tokens
            .iter()
            .try_fold(NodeId::ROOT, |n, &t| self.traverse(n, t))
    }

    /// Every keyword spelled by the tree, ordered by keyword index.
    pub fn enumerate(&self) -> Vec<String> {
        let mut found = vec![String::new(); self.keywords.len()];
        let mut stack = vec![(NodeId::ROOT, String::new())];
        while let Some((id, spelled)) = stack.pop() {
            let node = self.node(id);
            if let Some(k) = node.keyword_index {
                found[k] = spelled.clone();
            }
            for (&tok, &child) in &node.children {
                let mut s = spelled.clone();
                s.push_str(&self.alphabet[tok.index()]);
                stack.push((child, s));
            }
        }
        found
    }

    /// Indented text rendering, children in token order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<root> keywords={} nodes={}", self.keywords.len(), self.nodes.len());
        self.dump_children(NodeId::ROOT, 1, &mut out);
        out
    }

    fn dump_children(&self, id: NodeId, indent: usize, out: &mut String) {
        for tok in self.boosted_tokens(id) {
            let child_id = self.traverse(id, tok).unwrap();
            let child = self.node(child_id);
            let _ = write!(out, "{:width$}{}", "", self.alphabet[tok.index()], width = indent * 2);
            match child.keyword_index {
                Some(k) => {
                    let _ = writeln!(out, " [{}: {}]", k, self.keywords[k]);
                }
                None => out.push('\n'),
            }
            self.dump_children(child_id, indent + 1, out);
        }
    }
}
