//! Run configuration: a flat `key=value` file with dotted stage prefixes,
//! e.g. `embedding.dim=100`. Blank lines and `#` comments are ignored.

use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::classify::{GbtConfig, LogisticConfig, TreeConfig};
use crate::coherence::CoherenceConfig;
use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::features::{NoteFeatureConfig, TxnFeatureConfig};
use crate::io::parse_date;
use crate::topicmodel::{LdaConfig, SweepMode};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSettings {
    pub phrase_min_count: usize,
    pub phrase_threshold: f64,
    pub vocab_min_count: u64,
    pub stopwords: Option<PathBuf>,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        PreprocessSettings { phrase_min_count: 5, phrase_threshold: 0.3, vocab_min_count: 1, stopwords: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaggingSettings {
    /// Overrides every lexicon's threshold when set.
    pub threshold: Option<f64>,
    pub lexicons: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSettings {
    /// Defaults to the latest note or transaction date.
    pub as_of: Option<NaiveDate>,
    pub txn: TxnFeatureConfig,
    pub note: NoteFeatureConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifySettings {
    pub folds: usize,
    pub threshold: f64,
    pub logistic: LogisticConfig,
    pub tree: TreeConfig,
    pub gbt: GbtConfig,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings {
            folds: 5,
            threshold: 0.5,
            logistic: LogisticConfig::default(),
            tree: TreeConfig::default(),
            gbt: GbtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub notes: Option<PathBuf>,
    pub transactions: Option<PathBuf>,
    pub vix: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    pub preprocess: PreprocessSettings,
    pub lda: LdaConfig,
    /// Fit an LDA model inside `pipeline`.
    pub run_lda: bool,
    pub coherence: CoherenceConfig,
    pub embedding: EmbeddingConfig,
    pub tagging: TaggingSettings,
    pub features: FeatureSettings,
    pub classify: ClassifySettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            notes: None,
            transactions: None,
            vix: None,
            labels: None,
            output: PathBuf::from("out"),
            seed: 0,
            preprocess: PreprocessSettings::default(),
            lda: LdaConfig::default(),
            run_lda: true,
            coherence: CoherenceConfig::default(),
            embedding: EmbeddingConfig::default(),
            tagging: TaggingSettings::default(),
            features: FeatureSettings::default(),
            classify: ClassifySettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Apply `key=value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", i + 1, "expected key=value"))?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::parse("config", i + 1, e))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        let p = |v: &str| -> Result<f64> { parse(key, v) };
        match key {
            "notes" => self.notes = path(),
            "transactions" => self.transactions = path(),
            "vix" => self.vix = path(),
            "labels" => self.labels = path(),
            "output" => self.output = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,

            "preprocess.phrase_min_count" => self.preprocess.phrase_min_count = parse(key, value)?,
            "preprocess.phrase_threshold" => self.preprocess.phrase_threshold = p(value)?,
            "preprocess.vocab_min_count" => self.preprocess.vocab_min_count = parse(key, value)?,
            "preprocess.stopwords" => self.preprocess.stopwords = path(),

            "lda.enabled" => self.run_lda = parse_bool(key, value)?,
            "lda.k" => self.lda.k = parse(key, value)?,
            "lda.alpha" => self.lda.alpha = Some(p(value)?),
            "lda.beta" => self.lda.beta = p(value)?,
            "lda.iterations" => self.lda.iterations = parse(key, value)?,
            "lda.burn_in" => self.lda.burn_in = parse(key, value)?,
            "lda.thin" => self.lda.thin = parse(key, value)?,
            "lda.mode" => {
                self.lda.mode = match value {
                    "sequential" => SweepMode::Sequential,
                    "synchronous" => SweepMode::Synchronous,
                    _ => return Err(Error::Config(format!("unknown lda.mode `{value}`"))),
                }
            }

            "coherence.window_size" => self.coherence.window_size = parse(key, value)?,
            "coherence.top_n" => self.coherence.top_n = parse(key, value)?,
            "coherence.epsilon" => self.coherence.epsilon = p(value)?,
            "coherence.gamma" => self.coherence.gamma = p(value)?,

            "embedding.dim" => self.embedding.dim = parse(key, value)?,
            "embedding.window" => self.embedding.window = parse(key, value)?,
            "embedding.min_count" => self.embedding.min_count = parse(key, value)?,
            "embedding.negatives" => self.embedding.negatives = parse(key, value)?,
            "embedding.epochs" => self.embedding.epochs = parse(key, value)?,
            "embedding.lr_initial" => self.embedding.lr_initial = p(value)?,
            "embedding.lr_final" => self.embedding.lr_final = p(value)?,
            "embedding.subsample" => self.embedding.subsample = Some(p(value)?),
            "embedding.holdout_fraction" => self.embedding.holdout_fraction = p(value)?,

            "tagging.threshold" => self.tagging.threshold = Some(p(value)?),
            "tagging.lexicons" => self.tagging.lexicons = path(),

            "features.as_of" => {
                self.features.as_of =
                    Some(parse_date(value).ok_or_else(|| Error::Config(format!("invalid date `{value}` for `{key}`")))?)
            }
            "features.lookback_days" => self.features.txn.lookback_days = parse(key, value)?,
            "features.half_life_days" => self.features.note.half_life_days = p(value)?,
            "features.sentinel_days" => self.features.note.sentinel_days = p(value)?,

            "classify.folds" => self.classify.folds = parse(key, value)?,
            "classify.threshold" => self.classify.threshold = p(value)?,
            "classify.balanced" => {
                let b = parse_bool(key, value)?;
                self.classify.logistic.balanced = b;
                self.classify.tree.balanced = b;
                self.classify.gbt.balanced = b;
            }
            "classify.logistic.l2" => self.classify.logistic.l2 = p(value)?,
            "classify.logistic.epochs" => self.classify.logistic.epochs = parse(key, value)?,
            "classify.logistic.lr" => self.classify.logistic.lr = p(value)?,
            "classify.tree.max_depth" => self.classify.tree.max_depth = parse(key, value)?,
            "classify.tree.min_leaf" => self.classify.tree.min_leaf = parse(key, value)?,
            "classify.gbt.rounds" => self.classify.gbt.rounds = parse(key, value)?,
            "classify.gbt.learning_rate" => self.classify.gbt.learning_rate = p(value)?,
            "classify.gbt.max_depth" => self.classify.gbt.max_depth = parse(key, value)?,
            "classify.gbt.min_leaf" => self.classify.gbt.min_leaf = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Stage configs with the run seed pushed down.
    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig { seed: self.seed, ..self.lda.clone() }
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig { seed: self.seed, ..self.embedding.clone() }
    }
}
