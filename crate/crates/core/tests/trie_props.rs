use std::collections::HashSet;

use kbdecode::trie::NodeId;
use kbdecode::{KeywordTrie, TokenId, Vocabulary};
use proptest::prelude::*;

fn vocab() -> Vocabulary {
    let mut toks = vec!["_".to_string(), "|".to_string()];
    toks.extend(('a'..='f').map(String::from));
    Vocabulary::with_defaults(toks).unwrap()
}

fn ids(v: &Vocabulary, s: &str) -> Vec<TokenId> {
    s.chars().map(|c| v.char_id(c).unwrap()).collect()
}

fn keyword_sets() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-f]{1,6}", 0..12)
}

fn dedup(kws: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    kws.iter().filter(|k| seen.insert(k.as_str())).cloned().collect()
}

/// Every node reachable from the root with the string it spells.
fn spelled_nodes(t: &KeywordTrie) -> Vec<(String, NodeId)> {
    let mut out = vec![(String::new(), NodeId::ROOT)];
    let mut i = 0;
    while i < out.len() {
        let (s, id) = out[i].clone();
        for tok in t.boosted_tokens(id) {
            let child = t.traverse(id, tok).unwrap();
            out.push((format!("{s}{}", t.alphabet()[tok.index()]), child));
        }
        i += 1;
    }
    out
}

proptest! {
    #[test]
    fn keywords_walk_to_their_own_index(kws in keyword_sets()) {
        let v = vocab();
        let t = KeywordTrie::build(&kws, &v).unwrap();
        let unique = dedup(&kws);
        prop_assert_eq!(t.keywords(), unique.as_slice());
        prop_assert_eq!(t.enumerate(), unique.clone());
        for (i, k) in unique.iter().enumerate() {
            let node = t.walk(&ids(&v, k)).expect("keyword path exists");
            prop_assert_eq!(t.node(node).keyword_index, Some(i));
        }
    }

    #[test]
    fn non_prefixes_leave_at_first_divergence(kws in keyword_sets(), probe in "[a-f]{1,8}") {
        let v = vocab();
        let t = KeywordTrie::build(&kws, &v).unwrap();
        let is_prefix = |p: &str| p.is_empty() || kws.iter().any(|k| k.starts_with(p));
        let toks = ids(&v, &probe);
        // longest prefix of the probe that is still inside the tree
        let inside = (0..=probe.len()).rev().find(|&n| is_prefix(&probe[..n])).unwrap();
        prop_assert!(t.walk(&toks[..inside]).is_some());
        if inside < probe.len() {
            prop_assert!(t.walk(&toks[..=inside]).is_none());
            prop_assert!(t.walk(&toks).is_none());
        }
    }

    #[test]
    fn structure_invariants(kws in keyword_sets()) {
        let v = vocab();
        let t = KeywordTrie::build(&kws, &v).unwrap();
        let root = t.root();
        prop_assert!(root.token.is_none());
        prop_assert_eq!(root.depth, 0);
        prop_assert_eq!(root.keyword_index_or_neg(), -1);
        let nodes = spelled_nodes(&t);
        prop_assert_eq!(nodes.len(), t.num_nodes());
        let mut indices = Vec::new();
        for (s, id) in &nodes {
            let n = t.node(*id);
            prop_assert_eq!(n.depth as usize, s.chars().count());
            for tok in t.boosted_tokens(*id) {
                let c = t.node(t.traverse(*id, tok).unwrap());
                prop_assert_eq!(c.depth, n.depth + 1);
                prop_assert_eq!(c.token, Some(tok));
            }
            if let Some(k) = n.keyword_index {
                prop_assert_eq!(&t.keywords()[k], s);
                indices.push(k);
            }
        }
        indices.sort_unstable();
        prop_assert_eq!(indices, (0..t.keywords().len()).collect::<Vec<_>>());
    }

    #[test]
    fn shuffled_input_builds_the_same_shape(
        kws in keyword_sets(),
        perm in any::<prop::sample::Index>(),
    ) {
        let v = vocab();
        let mut shuffled = kws.clone();
        if !shuffled.is_empty() {
            let n = shuffled.len();
            shuffled.rotate_left(perm.index(n));
            shuffled.reverse();
        }
        let a = KeywordTrie::build(&kws, &v).unwrap();
        let b = KeywordTrie::build(&shuffled, &v).unwrap();
        prop_assert_eq!(a.num_nodes(), b.num_nodes());
        let shape = |t: &KeywordTrie| {
            let mut s: Vec<(String, Option<String>)> = spelled_nodes(t)
                .into_iter()
                .map(|(s, id)| {
                    let kw = t.node(id).keyword_index.map(|k| t.keywords()[k].clone());
                    (s, kw)
                })
                .collect();
            s.sort();
            s
        };
        prop_assert_eq!(shape(&a), shape(&b));
    }

    #[test]
    fn list_builder_drops_single_letters(kws in keyword_sets()) {
        let v = vocab();
        let t = KeywordTrie::build_from_list(&kws, &v).unwrap();
        prop_assert!(t.keywords().iter().all(|k| k.chars().count() > 1));
        let expected: Vec<String> = dedup(&kws).into_iter().filter(|k| k.len() > 1).collect();
        prop_assert_eq!(t.keywords(), expected.as_slice());
    }
}
