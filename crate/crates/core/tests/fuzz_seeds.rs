//! The checked-in fuzz seeds must stay valid inputs, or the fuzzers start
//! from nothing but rejects.

use std::fs;
use std::path::PathBuf;

use notesforge::classify::TrainedModel;
use notesforge::coherence::read_curve;
use notesforge::config::RunConfig;
use notesforge::corpus::{read_corpus_jsonl, read_notes_jsonl, PhraseTable, Vocabulary};
use notesforge::embedding::EmbeddingModel;
use notesforge::features::{read_labels, read_transactions, FeatureTable, VixSeries};
use notesforge::tagging::{parse_lexicons, read_events};
use notesforge::topicmodel::parse_theme_map;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("seed is utf-8")
}

#[test]
fn every_seed_parses() {
    let check = |target: &str, parse: &dyn Fn(&[u8]) -> bool| {
        for (path, bytes) in seeds(target) {
            assert!(parse(&bytes), "{} rejected", path.display());
        }
    };
    check("notes_jsonl", &|b| read_notes_jsonl(b).is_ok());
    check("corpus_jsonl", &|b| read_corpus_jsonl(b).is_ok());
    check("vocab_csv", &|b| Vocabulary::read_csv(b).is_ok());
    check("phrases_csv", &|b| PhraseTable::read_csv(text(b)).is_ok());
    check("lexicons_json", &|b| parse_lexicons(text(b)).is_ok());
    check("events_csv", &|b| read_events(b).is_ok());
    check("transactions_csv", &|b| read_transactions(b).is_ok());
    check("vix_csv", &|b| VixSeries::read_csv(b).is_ok());
    check("dataset_csv", &|b| FeatureTable::read_csv(b).is_ok());
    check("labels_csv", &|b| read_labels(b).is_ok());
    check("config", &|b| RunConfig::parse(text(b)).is_ok());
    check("vectors_text", &|b| EmbeddingModel::read_text(b).is_ok());
    check("embedding_json", &|b| EmbeddingModel::from_json(text(b)).is_ok());
    check("model_json", &|b| TrainedModel::from_json(text(b)).is_ok());
    check("coherence_curve", &|b| read_curve(text(b)).is_ok());
    check("theme_map", &|b| {
        let (&k, rest) = b.split_first().unwrap();
        parse_theme_map(text(rest), k as usize % 32).is_ok()
    });
}

#[test]
fn every_fuzz_target_has_seeds() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz");
    for entry in fs::read_dir(root.join("fuzz_targets")).unwrap() {
        let name = entry.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned();
        assert!(!seeds(&name).is_empty());
    }
}
