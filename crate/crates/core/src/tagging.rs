//! Semantic keyword tagging: seed words are expanded through embedding
//! similarity, then every occurrence of an expanded token is tagged.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawNote, TokenDoc};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Seed specification as it appears in lexicon config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSpec {
    pub topic: String,
    pub seeds: Vec<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

pub fn default_lexicons() -> Vec<LexiconSpec> {
    let spec = |topic: &str, seeds: &[&str]| LexiconSpec {
        topic: topic.into(),
        seeds: seeds.iter().map(|s| s.to_string()).collect(),
        threshold: DEFAULT_THRESHOLD,
    };
    vec![
        spec("market-volatility", &["market", "volatility"]),
        spec("peace-of-mind", &["sensitive", "concern", "panic"]),
    ]
}

/// Parse a lexicon config: a single JSON object or an array of them.
pub fn parse_lexicons(text: &str) -> Result<Vec<LexiconSpec>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(LexiconSpec),
        Many(Vec<LexiconSpec>),
    }
    let specs = match serde_json::from_str(text).map_err(|e| Error::parse("lexicon config", e.line(), e))? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    let mut seen = std::collections::HashSet::new();
    for s in &specs {
        if s.seeds.is_empty() {
            return Err(Error::Config(format!("lexicon `{}` has no seeds", s.topic)));
        }
        if !s.threshold.is_finite() {
            return Err(Error::Config(format!("lexicon `{}` has a non-finite threshold", s.topic)));
        }
        if !seen.insert(&s.topic) {
            return Err(Error::Config(format!("lexicon `{}` defined twice", s.topic)));
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicLexicon {
    pub topic: String,
    pub seeds: Vec<String>,
    pub threshold: f64,
    /// Token → max cosine to any seed. Seeds carry 1.0.
    pub expanded: BTreeMap<String, f64>,
    /// Seeds missing from the embedding vocabulary.
    pub warnings: Vec<String>,
}

impl TopicLexicon {
    pub fn similarity(&self, token: &str) -> Option<f64> {
        self.expanded.get(token).copied()
    }
}

/// Expand `spec.seeds` to every vocabulary token whose max cosine to an
/// in-vocabulary seed reaches the threshold. Seeds themselves, including
/// out-of-vocabulary ones, are kept at similarity 1.0.
pub fn expand_lexicon(model: &EmbeddingModel, spec: &LexiconSpec) -> Result<TopicLexicon> {
    if spec.seeds.is_empty() {
        return Err(Error::Config(format!("lexicon `{}` has no seeds", spec.topic)));
    }
    let (known, unknown): (Vec<&String>, Vec<&String>) =
        spec.seeds.iter().partition(|s| model.vocab.index_of(s).is_some());
    if known.is_empty() {
        return Err(Error::UnknownToken(spec.seeds.join(", ")));
    }
    let mut best = vec![f64::NEG_INFINITY; model.vocab.len()];
    for seed in &known {
        for (b, s) in best.iter_mut().zip(model.similarities(seed)?) {
            *b = b.max(s);
        }
    }
    let mut expanded: BTreeMap<String, f64> = model
        .vocab
        .tokens()
        .iter()
        .zip(best)
        .filter(|(_, s)| *s >= spec.threshold)
        .map(|(t, s)| (t.clone(), s))
        .collect();
    for seed in &spec.seeds {
        expanded.insert(seed.clone(), 1.0);
    }
    Ok(TopicLexicon {
        topic: spec.topic.clone(),
        seeds: spec.seeds.clone(),
        threshold: spec.threshold,
        expanded,
        warnings: unknown.into_iter().cloned().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagEvent {
    pub note_id: String,
    pub client_id: String,
    pub date: NaiveDate,
    pub topic: String,
    pub token: String,
    pub similarity: f64,
    pub position: usize,
}

/// One event per (token occurrence × matching lexicon), ordered by note id,
/// position, then topic name.
pub fn tag_corpus(docs: &[TokenDoc], notes: &[RawNote], lexicons: &[TopicLexicon]) -> Result<Vec<TagEvent>> {
    let meta: HashMap<&str, &RawNote> = notes.iter().map(|n| (n.note_id.as_str(), n)).collect();
    let missing: Vec<String> = docs
        .iter()
        .filter(|d| !meta.contains_key(d.note_id.as_str()))
        .map(|d| d.note_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingMetadata(missing));
    }
    let mut lexicons: Vec<&TopicLexicon> = lexicons.iter().collect();
    lexicons.sort_by(|a, b| a.topic.cmp(&b.topic));
    let mut order: Vec<&TokenDoc> = docs.iter().collect();
    order.sort_by(|a, b| a.note_id.cmp(&b.note_id));

    let mut events = Vec::new();
    for doc in order {
        let note = meta[doc.note_id.as_str()];
        for (position, token) in doc.tokens.iter().enumerate() {
            for lex in &lexicons {
                if let Some(similarity) = lex.similarity(token) {
                    events.push(TagEvent {
                        note_id: doc.note_id.clone(),
                        client_id: note.client_id.clone(),
                        date: note.date,
                        topic: lex.topic.clone(),
                        token: token.clone(),
                        similarity,
                        position,
                    });
                }
            }
        }
    }
    Ok(events)
}

pub fn write_events_csv(path: &Path, events: &[TagEvent]) -> Result<()> {
    crate::io::write_file(path, |w| write_events(w, events))
}

pub fn write_events<W: std::io::Write + ?Sized>(w: &mut W, events: &[TagEvent]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if events.is_empty() {
        out.write_record(["note_id", "client_id", "date", "topic", "token", "similarity", "position"])?;
    }
    for e in events {
        out.serialize(e)?;
    }
    out.flush()
}

pub fn read_events<R: std::io::Read>(r: R) -> Result<Vec<TagEvent>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse("tag events", i + 2, e)))
        .collect()
}
