//! End-to-end run: preprocess → (LDA) → embeddings → tagging → features →
//! cross-validated classifiers → importance rankings.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::classify::{self, CvReport, Dataset, ModelSpec, TrainedModel};
use crate::config::RunConfig;
use crate::corpus::stats::{corpus_stats, StatsReport};
use crate::corpus::{self, parse_stopwords, Preprocessed, PreprocessConfig, RawNote};
use crate::embedding::{self, EmbeddingModel};
use crate::error::{Error, Result};
use crate::features::{self, FeatureTable, TransactionRecord, VixSeries};
use crate::io::{read_to_string, write_file};
use crate::tagging::{self, LexiconSpec, TagEvent, TopicLexicon};
use crate::topicmodel::{self, LdaModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub notes: Vec<RawNote>,
    pub transactions: Vec<TransactionRecord>,
    pub vix: VixSeries,
    pub labels: BTreeMap<String, u8>,
}

pub struct Outputs {
    pub preprocessed: Preprocessed,
    pub stats: StatsReport,
    pub lda: Option<LdaModel>,
    pub embedding: EmbeddingModel,
    pub lexicons: Vec<TopicLexicon>,
    pub events: Vec<TagEvent>,
    pub as_of: NaiveDate,
    pub table: FeatureTable,
    pub cv: Vec<CvReport>,
    /// Models refit on the full dataset, in `cv` order.
    pub models: Vec<TrainedModel>,
}

pub fn preprocess_config(cfg: &RunConfig) -> Result<PreprocessConfig> {
    let mut pc = PreprocessConfig {
        phrase_min_count: cfg.preprocess.phrase_min_count,
        phrase_threshold: cfg.preprocess.phrase_threshold,
        vocab_min_count: cfg.preprocess.vocab_min_count,
        ..Default::default()
    };
    if let Some(path) = &cfg.preprocess.stopwords {
        pc.stopwords = parse_stopwords(&read_to_string(path)?);
    }
    Ok(pc)
}

pub fn lexicon_specs(cfg: &RunConfig) -> Result<Vec<LexiconSpec>> {
    let mut specs = match &cfg.tagging.lexicons {
        Some(path) => tagging::parse_lexicons(&read_to_string(path)?)?,
        None => tagging::default_lexicons(),
    };
    if let Some(t) = cfg.tagging.threshold {
        specs.iter_mut().for_each(|s| s.threshold = t);
    }
    Ok(specs)
}

/// Latest note or transaction date: the default as-of date.
pub fn latest_date(notes: &[RawNote], transactions: &[TransactionRecord]) -> Option<NaiveDate> {
    notes.iter().map(|n| n.date).chain(transactions.iter().map(|t| t.date)).max()
}

pub fn model_specs(cfg: &RunConfig) -> Vec<ModelSpec> {
    vec![
        ModelSpec::Logistic(cfg.classify.logistic.clone()),
        ModelSpec::Tree(cfg.classify.tree.clone()),
        ModelSpec::Gbt(cfg.classify.gbt.clone()),
    ]
}

/// Build the feature table from tag events and raw inputs.
pub fn featurize(
    inputs: &Inputs,
    events: &[TagEvent],
    topics: &[String],
    as_of: NaiveDate,
    cfg: &RunConfig,
) -> Result<FeatureTable> {
    let counts = features::note_counts(&inputs.notes, as_of)?;
    let note_group = features::note_features(events, &counts, topics, as_of, &cfg.features.note)?;
    let clients: Vec<String> = inputs.labels.keys().cloned().collect();
    let txn_group = features::txn_features(&inputs.transactions, &inputs.vix, as_of, &cfg.features.txn, &clients)?;
    features::build_dataset(&note_group, &txn_group, &inputs.labels)
}

pub fn run(inputs: &Inputs, cfg: &RunConfig) -> Result<Outputs> {
    let preprocessed = corpus::preprocess(&inputs.notes, &preprocess_config(cfg)?)?;
    if preprocessed.docs.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let stats = corpus_stats(&inputs.notes, 100);
    let lda = if cfg.run_lda {
        Some(topicmodel::fit(&preprocessed.docs, &preprocessed.vocab, &cfg.lda_config())?)
    } else {
        None
    };
    let embedding = embedding::train(&preprocessed.docs, &cfg.embedding_config())?;
    let lexicons = lexicon_specs(cfg)?
        .iter()
        .map(|s| tagging::expand_lexicon(&embedding, s))
        .collect::<Result<Vec<_>>>()?;
    let events = tagging::tag_corpus(&preprocessed.docs, &inputs.notes, &lexicons)?;
    let as_of = match cfg.features.as_of {
        Some(d) => d,
        None => latest_date(&inputs.notes, &inputs.transactions).ok_or(Error::EmptyCorpus)?,
    };
    let topics: Vec<String> = lexicons.iter().map(|l| l.topic.clone()).collect();
    let table = featurize(inputs, &events, &topics, as_of, cfg)?;
    let data = Dataset::from_table(&table)?;
    let mut cv = Vec::new();
    let mut models = Vec::new();
    for spec in model_specs(cfg) {
        cv.push(classify::cross_validate(&data, &spec, cfg.classify.folds, cfg.seed)?);
        models.push(classify::train(&data, &spec)?);
    }
    Ok(Outputs { preprocessed, stats, lda, embedding, lexicons, events, as_of, table, cv, models })
}

impl Outputs {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let pre = &self.preprocessed;
        write_file(&dir.join("corpus.jsonl"), |w| corpus::write_corpus_jsonl(w, &pre.docs))?;
        write_file(&dir.join("vocab.csv"), |w| pre.vocab.write_csv(w).map_err(std::io::Error::other))?;
        write_file(&dir.join("phrases.csv"), |w| pre.phrases.write_csv(w))?;
        self.stats.write_csvs(&dir.join("stats"))?;
        if let Some(lda) = &self.lda {
            lda.save(&dir.join("lda"))?;
        }
        self.embedding.save(&dir.join("embedding.json"))?;
        write_file(&dir.join("vectors.txt"), |w| self.embedding.write_text(w))?;
        let lex = serde_json::to_string_pretty(&self.lexicons).expect("lexicons serialize");
        write_file(&dir.join("lexicons.json"), |w| w.write_all(lex.as_bytes()))?;
        tagging::write_events_csv(&dir.join("events.csv"), &self.events)?;
        write_file(&dir.join("dataset.csv"), |w| self.table.write_csv(w))?;
        for (report, model) in self.cv.iter().zip(&self.models) {
            let name = &report.model;
            let model_json = model.to_json()?;
            write_file(&dir.join(format!("models/{name}.json")), |w| w.write_all(model_json.as_bytes()))?;
            let json = report.to_json();
            write_file(&dir.join(format!("reports/{name}_cv.json")), |w| w.write_all(json.as_bytes()))?;
            write_file(&dir.join(format!("reports/{name}_roc.csv")), |w| classify::write_roc(w, report.representative_roc()))?;
            write_file(&dir.join(format!("reports/{name}_importance.csv")), |w| {
                classify::write_importance(w, &model.feature_importance())
            })?;
        }
        Ok(())
    }
}
