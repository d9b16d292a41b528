//! Advisor-note ingestion and the preprocessing pipeline:
//! clean → tokenize → stopwords → phrases → lemmatize.

mod clean;
mod lemma;
mod phrases;
pub mod stats;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use clean::{clean, tokenize};
pub use lemma::Lemmatizer;
pub use phrases::{apply_phrases, mine_phrases, pair_npmi, PhraseTable, PHRASE_EPSILON};

use crate::error::{Error, Result};
use crate::io::numbered_lines;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNote {
    pub note_id: String,
    pub advisor_id: String,
    pub client_id: String,
    #[serde(with = "iso_date")]
    pub date: NaiveDate,
    pub text: String,
}

mod iso_date {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&d.format("%Y-%m-%d").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let raw = String::deserialize(d)?;
        crate::io::parse_date(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("`{raw}` is not an ISO-8601 date")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub note_id: String,
    pub tokens: Vec<String>,
}

/// Token ↔ index bijection with corpus occurrence counts. Indices follow
/// lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let (tokens, counts): (Vec<_>, Vec<_>) = counts.into_iter().unzip();
        Self::from_parts(tokens, counts).expect("BTreeMap keys are unique")
    }

    /// Build from tokens in index order; fails on duplicate tokens.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        assert_eq!(tokens.len(), counts.len());
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, counts, index })
    }

    pub fn from_docs(docs: &[TokenDoc]) -> Self {
        let mut counts = BTreeMap::new();
        for doc in docs {
            for t in &doc.tokens {
                *counts.entry(t.clone()).or_insert(0u64) += 1;
            }
        }
        Self::from_counts(counts)
    }

    /// Drop tokens seen fewer than `min_count` times; indices are reassigned.
    pub fn pruned(&self, min_count: u64) -> Self {
        let kept = self
            .tokens
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, &c)| (t.clone(), c))
            .collect();
        Self::from_counts(kept)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token_of(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn count_of(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.counts[i])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Content hash over tokens in index order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        format!("{:x}", h.finalize())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let schema = |e: csv::Error| Error::Schema(e.to_string());
        out.write_record(["token", "index", "count"]).map_err(schema)?;
        for (i, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            out.write_record([t.as_str(), &i.to_string(), &c.to_string()]).map_err(schema)?;
        }
        out.flush().map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse("vocabulary", line, e))?;
            if rec.len() != 3 {
                return Err(Error::parse("vocabulary", line, "expected token,index,count"));
            }
            let index: usize = rec[1].parse().map_err(|e| Error::parse("vocabulary", line, e))?;
            let count: u64 = rec[2].parse().map_err(|e| Error::parse("vocabulary", line, e))?;
            rows.push((index, rec[0].to_string(), count));
        }
        rows.sort();
        if rows.iter().enumerate().any(|(expected, r)| r.0 != expected) {
            return Err(Error::Schema("vocabulary indices must be 0..V without gaps".into()));
        }
        let (tokens, counts) = rows.into_iter().map(|(_, t, c)| (t, c)).unzip();
        Self::from_parts(tokens, counts)
    }
}

pub fn default_stopwords() -> HashSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// One word per line, `#` comments; entries are normalized like tokens.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(tokenize)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &HashSet<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub phrase_min_count: usize,
    pub phrase_threshold: f64,
    pub vocab_min_count: u64,
    /// Apply this table instead of mining phrases from the input notes.
    pub phrases: Option<PhraseTable>,
    pub lemmatizer: Lemmatizer,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: default_stopwords(),
            phrase_min_count: 5,
            phrase_threshold: 0.3,
            vocab_min_count: 1,
            phrases: None,
            lemmatizer: Lemmatizer::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub docs: Vec<TokenDoc>,
    pub vocab: Vocabulary,
    pub phrases: PhraseTable,
    /// Notes whose raw text was empty or whitespace.
    pub empty_notes: Vec<String>,
}

pub fn check_unique_ids(notes: &[RawNote]) -> Result<()> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for n in notes {
        if !seen.insert(n.note_id.as_str()) && !dups.contains(&n.note_id) {
            dups.push(n.note_id.clone());
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        Err(Error::DuplicateNoteIds(dups))
    }
}

/// Run the full pipeline over `notes`. Tokens below `vocab_min_count` are
/// removed from the documents as well as from the vocabulary.
pub fn preprocess(notes: &[RawNote], config: &PreprocessConfig) -> Result<Preprocessed> {
    check_unique_ids(notes)?;
    let empty_notes = notes
        .iter()
        .filter(|n| n.text.trim().is_empty())
        .map(|n| n.note_id.clone())
        .collect();

    let filtered: Vec<TokenDoc> = notes
        .iter()
        .map(|n| TokenDoc {
            note_id: n.note_id.clone(),
            tokens: remove_stopwords(tokenize(&clean(&n.text)), &config.stopwords),
        })
        .collect();

    let phrases = match &config.phrases {
        Some(table) => table.clone(),
        None => mine_phrases(&filtered, config.phrase_min_count, config.phrase_threshold),
    };

    let mut docs: Vec<TokenDoc> = filtered
        .iter()
        .map(|d| {
            let mut merged = apply_phrases(d, &phrases);
            for t in merged.tokens.iter_mut() {
                *t = config.lemmatizer.lemmatize(t);
            }
            merged
        })
        .collect();

    let vocab = Vocabulary::from_docs(&docs).pruned(config.vocab_min_count);
    if config.vocab_min_count > 1 {
        for d in docs.iter_mut() {
            d.tokens.retain(|t| vocab.index_of(t).is_some());
        }
    }
    Ok(Preprocessed {
        docs,
        vocab,
        phrases,
        empty_notes,
    })
}

pub fn read_notes_jsonl<R: BufRead>(reader: R) -> Result<Vec<RawNote>> {
    let mut notes = Vec::new();
    for (line, text) in numbered_lines(reader) {
        let text = text.map_err(|e| Error::parse("notes", line, e))?;
        let note: RawNote = serde_json::from_str(&text).map_err(|e| Error::parse("notes", line, e))?;
        if note.note_id.is_empty() {
            return Err(Error::parse("notes", line, "note_id must be nonempty"));
        }
        notes.push(note);
    }
    Ok(notes)
}

pub fn write_notes_jsonl<W: Write>(mut w: W, notes: &[RawNote]) -> std::io::Result<()> {
    for n in notes {
        serde_json::to_writer(&mut w, n)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus_jsonl<R: BufRead>(reader: R) -> Result<Vec<TokenDoc>> {
    let mut docs = Vec::new();
    for (line, text) in numbered_lines(reader) {
        let text = text.map_err(|e| Error::parse("corpus", line, e))?;
        docs.push(serde_json::from_str(&text).map_err(|e| Error::parse("corpus", line, e))?);
    }
    Ok(docs)
}

pub fn write_corpus_jsonl<W: Write>(mut w: W, docs: &[TokenDoc]) -> std::io::Result<()> {
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Date lookup for notes, used when validating date ranges.
pub fn note_dates(notes: &[RawNote]) -> HashMap<&str, NaiveDate> {
    notes.iter().map(|n| (n.note_id.as_str(), n.date)).collect()
}
