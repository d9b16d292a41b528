use std::collections::{BTreeSet, HashMap, HashSet};

use notesforge::coherence::{c_v, count_windows, count_windows_for, npmi, CoherenceConfig};
use notesforge::corpus::{TokenDoc, Vocabulary};
use notesforge::synth::{gen_topic_corpus, TopicCorpusSpec};
use notesforge::topicmodel::{fit, fit_observed, LdaConfig, SweepMode};
use proptest::prelude::*;

fn docs_strategy(max_docs: usize, max_len: usize) -> impl Strategy<Value = Vec<TokenDoc>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 0..max_len),
        0..max_docs,
    )
    .prop_map(|ds| {
        ds.into_iter()
            .enumerate()
            .map(|(i, ts)| TokenDoc { note_id: format!("d{i}"), tokens: ts.into_iter().map(String::from).collect() })
            .collect()
    })
}

/// Enumerate every boolean window explicitly.
fn brute_windows(corpus: &[TokenDoc], w: usize) -> (u64, HashMap<String, u64>, HashMap<(String, String), u64>) {
    let mut total = 0;
    let mut single = HashMap::new();
    let mut pairs = HashMap::new();
    for doc in corpus {
        let n = doc.tokens.len();
        if n == 0 {
            continue;
        }
        let starts = if n <= w { 1 } else { n - w + 1 };
        for s in 0..starts {
            total += 1;
            let set: BTreeSet<&String> = doc.tokens[s..(s + w).min(n)].iter().collect();
            for a in &set {
                *single.entry((*a).clone()).or_insert(0) += 1;
                for b in &set {
                    if a < b {
                        *pairs.entry(((*a).clone(), (*b).clone())).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    (total, single, pairs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn window_counts_match_enumeration(corpus in docs_strategy(12, 80), w in 2usize..12) {
        let wc = count_windows(&corpus, w).unwrap();
        let (total, single, pairs) = brute_windows(&corpus, w);
        prop_assert_eq!(wc.total_windows(), total);
        for t in ["a", "b", "c", "d", "e", "f"] {
            prop_assert_eq!(wc.count(t), single.get(t).copied().unwrap_or(0), "token {}", t);
            for u in ["a", "b", "c", "d", "e", "f"] {
                if t < u {
                    let want = pairs.get(&(t.to_string(), u.to_string())).copied().unwrap_or(0);
                    prop_assert_eq!(wc.pair_count(t, u), want);
                    prop_assert_eq!(wc.pair_count(u, t), want);
                }
            }
        }
        let only: HashSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        let sub = count_windows_for(&corpus, w, &only).unwrap();
        prop_assert_eq!(sub.total_windows(), total);
        prop_assert_eq!(sub.pair_count("a", "c"), wc.pair_count("a", "c"));
        prop_assert_eq!(sub.count("b"), 0);
    }

    #[test]
    fn npmi_is_symmetric_and_bounded(corpus in docs_strategy(10, 40), w in 2usize..8) {
        let wc = count_windows(&corpus, w).unwrap();
        let present: Vec<&str> = ["a", "b", "c", "d"].into_iter().filter(|t| wc.count(t) > 0).collect();
        for a in &present {
            for b in &present {
                let ab = npmi(&wc, a, b, 1e-12).unwrap();
                let ba = npmi(&wc, b, a, 1e-12).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!((-1.0..=1.0).contains(&ab), "{}", ab);
            }
        }
    }

    #[test]
    fn c_v_ignores_word_order(corpus in docs_strategy(10, 40), perm in Just(()).prop_perturb(|_, mut r| {
        let mut v = vec!["a", "b", "c", "d", "e"];
        for i in (1..v.len()).rev() {
            v.swap(i, (r.next_u32() as usize) % (i + 1));
        }
        v
    })) {
        let wc = count_windows(&corpus, 5).unwrap();
        let cfg = CoherenceConfig::default();
        let sorted: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
        let shuffled: Vec<String> = perm.iter().map(|s| s.to_string()).collect();
        match (c_v(&sorted, &wc, &cfg), c_v(&shuffled, &wc, &cfg)) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }
}

#[test]
fn npmi_increases_with_cooccurrence() {
    let doc = |id: &str, s: &str| TokenDoc { note_id: id.into(), tokens: s.split(' ').map(String::from).collect() };
    let together: Vec<TokenDoc> = (0..10).map(|i| doc(&i.to_string(), "x y")).chain([doc("p", "z"), doc("q", "z")]).collect();
    let apart: Vec<TokenDoc> = (0..10).map(|i| doc(&i.to_string(), if i % 2 == 0 { "x z" } else { "y z" })).collect();
    let hi = npmi(&count_windows(&together, 2).unwrap(), "x", "y", 1e-12).unwrap();
    let lo = npmi(&count_windows(&apart, 2).unwrap(), "x", "y", 1e-12).unwrap();
    assert!(hi > 0.9 && lo < 0.0, "{hi} {lo}");
}

fn small_corpus(seed: u64) -> Vec<TokenDoc> {
    let spec = TopicCorpusSpec { n_topics: 3, vocab_per_topic: 6, n_docs: 40, doc_length: (5, 15), seed, ..Default::default() };
    gen_topic_corpus(&spec).unwrap().docs
}

#[test]
fn counts_conserved_after_every_sweep() {
    for mode in [SweepMode::Sequential, SweepMode::Synchronous] {
        let docs = small_corpus(4);
        let vocab = Vocabulary::from_docs(&docs);
        let tokens: u64 = docs.iter().map(|d| d.tokens.len() as u64).sum();
        let cfg = LdaConfig { k: 4, iterations: 60, burn_in: 20, thin: 5, mode, ..Default::default() };
        let mut sweeps = 0;
        fit_observed(&docs, &vocab, &cfg, &mut |_, s| {
            sweeps += 1;
            assert!(s.check_counts(4, vocab.len()));
            assert_eq!(s.topic_totals.iter().sum::<u64>(), tokens);
            for (d, row) in s.doc_topic.iter().enumerate() {
                assert_eq!(row.iter().map(|&c| c as usize).sum::<usize>(), docs[d].tokens.len());
            }
        })
        .unwrap();
        assert_eq!(sweeps, 60);
    }
}

#[test]
fn synchronous_sweeps_are_order_invariant() {
    let docs = small_corpus(9);
    let vocab = Vocabulary::from_docs(&docs);
    let cfg = LdaConfig { k: 3, iterations: 40, burn_in: 10, thin: 5, seed: 3, mode: SweepMode::Synchronous, ..Default::default() };
    let a = fit(&docs, &vocab, &cfg).unwrap();
    let mut reversed = docs.clone();
    reversed.reverse();
    let b = fit(&reversed, &vocab, &cfg).unwrap();
    assert_eq!(a.topic_word_counts, b.topic_word_counts);
    assert_eq!(a.phi, b.phi);
    let n = docs.len();
    for d in 0..n {
        assert_eq!(a.theta[d], b.theta[n - 1 - d]);
        assert_eq!(a.assignments[d], b.assignments[n - 1 - d]);
    }
}
