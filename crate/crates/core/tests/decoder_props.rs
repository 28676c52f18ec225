mod common;

use common::*;
use kbdecode::decoder::{advance, Branch, KeywordCursor};
use kbdecode::lm::{CharLm, LmScorer, NgramModel, Unit};
use kbdecode::{decode, DecodeError, DecoderConfig, EmissionMatrix, KeywordTrie, TokenId, Vocabulary};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    vocab: Vocabulary,
    emissions: EmissionMatrix,
    keywords: Vec<String>,
    lm: CharLm,
}

fn setup(seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = small_vocab(rng.gen_range(4..=9));
    let frames = rng.gen_range(1..=25);
    let scale = rng.gen_range(0.5..4.0);
    let emissions = random_emissions(&mut rng, frames, vocab.len(), scale);
    let letters: Vec<char> = vocab.tokens()[2..].iter().flat_map(|t| t.chars()).collect();
    let keywords = (0..rng.gen_range(1..6))
        .map(|_| (0..rng.gen_range(2..5)).map(|_| *letters.choose(&mut rng).unwrap()).collect())
        .collect();
    let symbols: Vec<&str> = vocab.tokens()[1..].iter().map(String::as_str).collect();
    let order = rng.gen_range(1..=4);
    let arpa = random_arpa(&mut rng, &symbols, order, true);
    let lm = CharLm::new(NgramModel::from_arpa_str(&arpa.text, Unit::Character).unwrap());
    Setup {
        vocab,
        emissions,
        keywords,
        lm,
    }
}

fn symbols<'a>(v: &'a Vocabulary, tokens: &[TokenId]) -> Vec<&'a str> {
    tokens.iter().map(|&t| v.token(t)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_hypothesis_decomposes(
        seed in any::<u64>(),
        w in 0.0f64..3.0,
        lm_w in 0.0f64..1.5,
        bonus in -1.0f64..1.0,
        beam in 1usize..40,
    ) {
        let s = setup(seed);
        let trie = KeywordTrie::build(&s.keywords, &s.vocab).unwrap();
        let cfg = DecoderConfig {
            beam_width: beam,
            keyword_weight: w,
            lm_weight: lm_w,
            length_bonus: bonus,
            nbest: beam,
            ..DecoderConfig::default()
        };
        let r = decode(&s.emissions, &s.vocab, Some(&trie), Some(&s.lm), &cfg).unwrap();
        prop_assert!(!r.n_best.is_empty() && r.n_best.len() <= beam);
        prop_assert_eq!(&r.transcript, &r.n_best[0].transcript);
        let boundary = s.vocab.boundary().map(|b| s.vocab.token(b));
        let sim = BoostSim::new(&s.keywords, w);
        for pair in r.n_best.windows(2) {
            prop_assert!(pair[0].score_total >= pair[1].score_total);
        }
        for h in &r.n_best {
            let sum = h.score_am + lm_w * h.score_lm + h.score_boost + h.score_length;
            prop_assert!((h.score_total - sum).abs() <= 1e-9);
            let syms = symbols(&s.vocab, &h.tokens);
            prop_assert_eq!(h.words, word_count(&syms, boundary));
            prop_assert!((h.score_length - bonus * h.words as f64).abs() <= 1e-12);
            // boost recomputed from the spelled output
            let trace = sim.run(&syms, boundary);
            prop_assert!((h.score_boost - trace.total).abs() <= 1e-9);
            prop_assert!(trace.pending >= 0.0);
            prop_assert_eq!(h.transcript.clone(), s.vocab.render(&h.tokens));
        }
    }

    #[test]
    fn zero_weight_is_plain_search(seed in any::<u64>(), lm_w in 0.0f64..1.0) {
        let s = setup(seed);
        let trie = KeywordTrie::build(&s.keywords, &s.vocab).unwrap();
        let base = DecoderConfig { lm_weight: lm_w, nbest: 5, ..DecoderConfig::default() };
        let plain = decode(&s.emissions, &s.vocab, None, Some(&s.lm), &base).unwrap();
        let zero = decode(&s.emissions, &s.vocab, Some(&trie), Some(&s.lm), &base).unwrap();
        prop_assert_eq!(plain, zero);
    }

    #[test]
    fn decoding_is_deterministic(seed in any::<u64>()) {
        let s = setup(seed);
        let trie = KeywordTrie::build(&s.keywords, &s.vocab).unwrap();
        let cfg = DecoderConfig { keyword_weight: 1.0, lm_weight: 0.5, nbest: 10, ..DecoderConfig::default() };
        let lm: &dyn LmScorer = &s.lm;
        let a = decode(&s.emissions, &s.vocab, Some(&trie), Some(lm), &cfg).unwrap();
        let b = decode(&s.emissions, &s.vocab, Some(&trie), Some(lm), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn abandoned_paths_net_to_zero(
        kws in prop::collection::vec("[a-d]{2,5}", 1..6),
        path in "[a-d|]{0,30}",
        w in prop::sample::select(vec![0.3, 0.6, 1.0, 1.2, 2.0]),
    ) {
        let v = small_vocab(6);
        let trie = KeywordTrie::build(&kws, &v).unwrap();
        let mut cursor = KeywordCursor::START;
        let mut excursion = 0.0;
        for c in path.chars() {
            let t = if c == '|' { v.boundary().unwrap() } else { v.char_id(c).unwrap() };
            let up = advance(&trie, &v, &cursor, t, w);
            match up.branch {
                Branch::Advance => excursion += up.delta,
                Branch::Escape | Branch::Reenter => {
                    prop_assert_eq!(excursion + up.delta, 0.0);
                    excursion = 0.0;
                }
            }
            if up.completed.is_some() {
                excursion = 0.0;
            }
            prop_assert!(up.cursor.pending >= 0.0);
            cursor = up.cursor;
        }
        let syms: Vec<String> = path.chars().map(String::from).collect();
        let syms: Vec<&str> = syms.iter().map(String::as_str).collect();
        let trace = BoostSim::new(&kws, w).run(&syms, Some("|"));
        prop_assert!((cursor.total() - trace.total).abs() <= 1e-9);
    }
}

#[test]
fn input_validation() {
    let v = small_vocab(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let em = random_emissions(&mut rng, 3, 5, 1.0);
    let cfg = DecoderConfig::default();
    assert_eq!(
        decode(&em, &v, None, None, &cfg).unwrap_err(),
        DecodeError::ShapeMismatch { emissions: 5, vocab: 4 }
    );
    let other = small_vocab(5);
    let trie = KeywordTrie::build(["ab"], &other).unwrap();
    let em = random_emissions(&mut rng, 3, 4, 1.0);
    assert_eq!(decode(&em, &v, Some(&trie), None, &cfg).unwrap_err(), DecodeError::VocabMismatch);

    let empty = EmissionMatrix::new(0, 4, vec![]).unwrap();
    assert_eq!(decode(&empty, &v, None, None, &cfg).unwrap_err(), DecodeError::EmptyEmissions);
    let r = decode(&empty, &v, None, None, &DecoderConfig { allow_empty: true, ..cfg.clone() }).unwrap();
    assert_eq!(r.transcript, "");
    assert_eq!(r.score_total, 0.0);

    for bad in [
        DecoderConfig { beam_width: 0, ..cfg.clone() },
        DecoderConfig { keyword_weight: -1.0, ..cfg.clone() },
        DecoderConfig { lm_weight: f64::NAN, ..cfg.clone() },
        DecoderConfig { prune_logp_threshold: Some(f64::INFINITY), ..cfg.clone() },
    ] {
        assert!(matches!(decode(&em, &v, None, None, &bad), Err(DecodeError::InvalidConfig(_))));
    }
}

#[test]
fn exhaustive_search_matches_enumeration_without_boundary() {
    // a vocabulary with no word boundary keeps the whole output one word
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = letters_only_vocab(3);
        let em = random_emissions(&mut rng, 5, 3, 2.0);
        let trie = KeywordTrie::build(["ab", "ba"], &v).unwrap();
        let cfg = DecoderConfig { keyword_weight: 0.8, ..DecoderConfig::exhaustive() };
        let got = decode(&em, &v, Some(&trie), None, &cfg).unwrap();
        let sim = BoostSim::new(&["ab", "ba"], 0.8);
        let best = ctc_brute_force(&rows_f64(&em), 0)
            .into_iter()
            .map(|(toks, am)| {
                let syms: Vec<&str> = toks.iter().map(|&t| v.token(TokenId(t))).collect();
                am + sim.run(&syms, None).total
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((got.score_total - best).abs() < 1e-6, "seed {seed}");
    }
}
