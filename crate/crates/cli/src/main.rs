//! `notesforge` command line. Every stage reads and writes plain files so the
//! pipeline can be run piecewise or end to end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use notesforge::classify::{self, CvReport, Dataset, ModelSpec, TrainedModel};
use notesforge::coherence::{self, CoherenceConfig};
use notesforge::config::{ClassifySettings, PreprocessSettings, RunConfig};
use notesforge::corpus::stats::corpus_stats;
use notesforge::corpus::{self, read_corpus_jsonl, read_notes_jsonl, RawNote, TokenDoc, Vocabulary};
use notesforge::embedding::{self, EmbeddingConfig, EmbeddingModel};
use notesforge::features::{read_labels, read_transactions, FeatureTable, NoteFeatureConfig, TxnFeatureConfig, VixSeries};
use notesforge::io::{fmt_f64, open, read_to_string, write_file};
use notesforge::pipeline::{self, Inputs};
use notesforge::synth::{self, ScenarioSpec, TopicCorpusSpec};
use notesforge::tagging;
use notesforge::topicmodel::{self, LdaConfig, LdaModel};
use notesforge::{Error, ErrorCategory, Result};

#[derive(Parser)]
#[command(name = "notesforge", version, about = "Advisor-notes analytics: topics, embeddings, tagging and cash-out classifiers")]
struct Cli {
    /// Flat key=value config file (dotted stage keys, e.g. embedding.dim=100); flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Extra config entry, applied after the file (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run seed [default: 0, or NOTESFORGE_SEED when set]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, short, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Log only warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a synthetic scenario or topic corpus with planted ground truth
    Synth(SynthCmd),
    /// Clean, tokenize, drop stopwords, merge phrases and lemmatize notes
    Preprocess {
        #[command(flatten)]
        notes: NotesArg,
        #[command(flatten)]
        pre: PreprocessArgs,
    },
    /// Monthly note volumes and note-length histograms
    Stats {
        #[command(flatten)]
        notes: NotesArg,
    },
    /// Topic modeling
    #[command(subcommand)]
    Lda(LdaCmd),
    /// Per-topic C_v coherence of a fitted topic model
    Coherence {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Topic model directory written by `lda fit`
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        #[command(flatten)]
        coh: CoherenceArgs,
    },
    /// Skip-gram word embeddings
    #[command(subcommand)]
    Embed(EmbedCmd),
    /// Expand seed lexicons and tag note tokens
    Tag {
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        notes: NotesArg,
        /// Embedding model (embedding.json, or a vectors .txt file)
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[command(flatten)]
        tag: TagArgs,
    },
    /// Join note and transaction features into a labeled dataset
    Featurize {
        /// Tag events CSV written by `tag`
        #[arg(long, value_name = "FILE")]
        events: Option<PathBuf>,
        #[command(flatten)]
        notes: NotesArg,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        /// Lexicon config naming the topics [default: built-in lexicons]
        #[arg(long, id = "tagging.lexicons", value_name = "FILE")]
        lexicons: Option<PathBuf>,
    },
    /// Fit one classifier on the whole dataset
    Train {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Model family
        #[arg(long = "model-kind", value_enum, default_value_t = ModelKind::Gbt)]
        kind: ModelKind,
        #[command(flatten)]
        cls: ClassifyArgs,
    },
    /// Stratified k-fold evaluation, or scoring of a saved model
    Evaluate {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Model families to cross-validate
        #[arg(long = "model-kind", value_enum, value_delimiter = ',', default_values_t = [ModelKind::Logistic, ModelKind::Tree, ModelKind::Gbt])]
        kinds: Vec<ModelKind>,
        /// Score this saved model instead of cross-validating
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[command(flatten)]
        cls: ClassifyArgs,
    },
    /// Feature importance ranking of a saved model, as CSV on stdout
    Importance {
        /// Model JSON written by `train`
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Rows to print (0 = all)
        #[arg(long, default_value_t = 0)]
        top: usize,
        /// Cutoff for the reported note-feature share
        #[arg(long, default_value_t = 10)]
        share_k: usize,
    },
    /// Preprocess → LDA → embeddings → tagging → features → evaluation
    Pipeline {
        /// Generate inputs instead of reading them: `default` or a scenario JSON file
        #[arg(long, value_name = "default|FILE")]
        synth: Option<String>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        notes: NotesArg,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        pre: PreprocessArgs,
        /// Number of topics
        #[arg(long, id = "lda.k", default_value_t = LdaConfig::default().k)]
        k: usize,
        /// Skip topic modeling
        #[arg(long = "no-lda", id = "lda.enabled", action = ArgAction::SetFalse)]
        lda_enabled: bool,
        #[command(flatten)]
        lda: LdaArgs,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        tag: TagArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        cls: ClassifyArgs,
    },
}

#[derive(Subcommand)]
enum LdaCmd {
    /// Fit a topic model and report topic shares
    Fit {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Number of topics
        #[arg(long, id = "lda.k", default_value_t = LdaConfig::default().k)]
        k: usize,
        #[command(flatten)]
        lda: LdaArgs,
        /// Optional `topic,theme` CSV consolidating topics into themes
        #[arg(long, value_name = "FILE")]
        themes: Option<PathBuf>,
        /// Top words listed per topic
        #[arg(long, id = "coherence.top_n", default_value_t = CoherenceConfig::default().top_n)]
        top_n: usize,
    },
    /// Fit one model per k and pick the k with the highest mean C_v
    Scan {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Topic counts to try
        #[arg(long = "k", value_delimiter = ',', default_values_t = [5, 10, 15, 20, 25])]
        k_values: Vec<usize>,
        #[command(flatten)]
        lda: LdaArgs,
        #[command(flatten)]
        coh: CoherenceArgs,
    },
}

#[derive(Subcommand)]
enum EmbedCmd {
    /// Train skip-gram-with-negative-sampling vectors
    Train {
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        embed: EmbedArgs,
    },
    /// Nearest neighbours of a word by cosine similarity
    Similar {
        /// Embedding model (embedding.json, or a vectors .txt file)
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Query word
        #[arg(long)]
        word: String,
        /// Neighbours to list
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Args)]
struct SynthCmd {
    /// What to generate
    #[arg(long, value_enum, default_value_t = SynthKind::Scenario)]
    kind: SynthKind,
    /// Scenario JSON spec (missing fields take defaults); flags override it
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Topics in a topic corpus
    #[arg(long, default_value_t = TopicCorpusSpec::default().n_topics)]
    topics: usize,
    /// Documents in a topic corpus
    #[arg(long, default_value_t = TopicCorpusSpec::default().n_docs)]
    docs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Clients, notes, trades, VIX and cash-out labels
    Scenario,
    /// Documents drawn from disjoint-vocabulary topics
    Topics,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Baserate,
    Logistic,
    Tree,
    Gbt,
}

impl ModelKind {
    fn spec(self, cls: &ClassifySettings) -> ModelSpec {
        match self {
            ModelKind::Baserate => ModelSpec::BaseRate,
            ModelKind::Logistic => ModelSpec::Logistic(cls.logistic.clone()),
            ModelKind::Tree => ModelSpec::Tree(cls.tree.clone()),
            ModelKind::Gbt => ModelSpec::Gbt(cls.gbt.clone()),
        }
    }
}

// Flag groups below whose ids are config keys are read back from the
// matches (see `apply_flags`), so their typed fields only drive parsing and help.

#[derive(Args)]
struct NotesArg {
    /// Raw notes JSONL
    #[arg(long, id = "notes", value_name = "FILE")]
    notes: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArg {
    /// Preprocessed corpus JSONL written by `preprocess`
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArg {
    /// Feature table CSV written by `featurize`
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
#[allow(dead_code)]
struct TableArgs {
    /// Transactions CSV
    #[arg(long, id = "transactions", value_name = "FILE")]
    transactions: Option<PathBuf>,
    /// Daily VIX CSV
    #[arg(long, id = "vix", value_name = "FILE")]
    vix: Option<PathBuf>,
    /// Cash-out labels CSV
    #[arg(long, id = "labels", value_name = "FILE")]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Synthetic clients
    #[arg(long, default_value_t = ScenarioSpec::default().n_clients)]
    clients: usize,
    /// Effect of latent anxiety on cash-out log-odds
    #[arg(long, default_value_t = ScenarioSpec::default().beta_signal)]
    beta_signal: f64,
    /// Share of an anxious client's trades moved into volatile weeks
    #[arg(long, default_value_t = ScenarioSpec::default().trade_signal)]
    trade_signal: f64,
}

#[derive(Args)]
#[allow(dead_code)]
struct PreprocessArgs {
    /// Minimum count of a phrase candidate
    #[arg(long, id = "preprocess.phrase_min_count", default_value_t = PreprocessSettings::default().phrase_min_count)]
    phrase_min_count: usize,
    /// NPMI threshold for merging phrases
    #[arg(long, id = "preprocess.phrase_threshold", default_value_t = PreprocessSettings::default().phrase_threshold)]
    phrase_threshold: f64,
    /// Minimum token count kept in the vocabulary
    #[arg(long, id = "preprocess.vocab_min_count", default_value_t = PreprocessSettings::default().vocab_min_count)]
    vocab_min_count: u64,
    /// Stopword file, one word per line [default: built-in English list]
    #[arg(long, id = "preprocess.stopwords", value_name = "FILE")]
    stopwords: Option<PathBuf>,
}

#[derive(Args)]
#[allow(dead_code)]
struct LdaArgs {
    /// Doc-topic prior [default: 50/k]
    #[arg(long, id = "lda.alpha")]
    alpha: Option<f64>,
    /// Topic-word prior
    #[arg(long, id = "lda.beta", default_value_t = LdaConfig::default().beta)]
    beta: f64,
    /// Gibbs sweeps
    #[arg(long, id = "lda.iterations", default_value_t = LdaConfig::default().iterations)]
    iterations: usize,
    /// Sweeps discarded before averaging
    #[arg(long, id = "lda.burn_in", default_value_t = LdaConfig::default().burn_in)]
    burn_in: usize,
    /// Average every n-th sweep after burn-in
    #[arg(long, id = "lda.thin", default_value_t = LdaConfig::default().thin)]
    thin: usize,
    /// Sweep schedule
    #[arg(long, id = "lda.mode", value_parser = ["sequential", "synchronous"], default_value = "sequential")]
    mode: String,
}

#[derive(Args)]
#[allow(dead_code)]
struct CoherenceArgs {
    /// Boolean sliding-window size
    #[arg(long, id = "coherence.window_size", default_value_t = CoherenceConfig::default().window_size)]
    window_size: usize,
    /// Top words scored per topic
    #[arg(long, id = "coherence.top_n", default_value_t = CoherenceConfig::default().top_n)]
    top_n: usize,
}

#[derive(Args)]
#[allow(dead_code)]
struct EmbedArgs {
    /// Vector dimension
    #[arg(long, id = "embedding.dim", default_value_t = EmbeddingConfig::default().dim)]
    dim: usize,
    /// Context window on each side
    #[arg(long, id = "embedding.window", default_value_t = EmbeddingConfig::default().window)]
    window: usize,
    /// Minimum token count to get a vector
    #[arg(long, id = "embedding.min_count", default_value_t = EmbeddingConfig::default().min_count)]
    min_count: u64,
    /// Negative samples per pair
    #[arg(long, id = "embedding.negatives", default_value_t = EmbeddingConfig::default().negatives)]
    negatives: usize,
    /// Passes over the corpus
    #[arg(long, id = "embedding.epochs", default_value_t = EmbeddingConfig::default().epochs)]
    epochs: usize,
    /// Initial learning rate
    #[arg(long, id = "embedding.lr_initial", default_value_t = EmbeddingConfig::default().lr_initial)]
    lr_initial: f64,
    /// Final learning rate
    #[arg(long, id = "embedding.lr_final", default_value_t = EmbeddingConfig::default().lr_final)]
    lr_final: f64,
    /// Frequent-word subsampling threshold [default: off]
    #[arg(long, id = "embedding.subsample")]
    subsample: Option<f64>,
}

#[derive(Args)]
#[allow(dead_code)]
struct TagArgs {
    /// Cosine threshold for every lexicon [default: per lexicon, built-ins use 0.7]
    #[arg(long, id = "tagging.threshold")]
    threshold: Option<f64>,
    /// Lexicon config JSON (topic, seeds, threshold) [default: built-in lexicons]
    #[arg(long, id = "tagging.lexicons", value_name = "FILE")]
    lexicons: Option<PathBuf>,
}

#[derive(Args)]
#[allow(dead_code)]
struct FeatureArgs {
    /// Feature cut-off date [default: latest note or trade date]
    #[arg(long, id = "features.as_of", value_name = "YYYY-MM-DD")]
    as_of: Option<String>,
    /// Transaction lookback window
    #[arg(long, id = "features.lookback_days", default_value_t = TxnFeatureConfig::default().lookback_days)]
    lookback_days: i64,
    /// Half-life of the recency-weighted tag count
    #[arg(long, id = "features.half_life_days", default_value_t = NoteFeatureConfig::default().half_life_days)]
    half_life_days: f64,
    /// days_since_last for a topic never tagged
    #[arg(long, id = "features.sentinel_days", default_value_t = NoteFeatureConfig::default().sentinel_days)]
    sentinel_days: f64,
}

#[derive(Args)]
#[allow(dead_code)]
struct ClassifyArgs {
    /// Cross-validation folds
    #[arg(long, id = "classify.folds", default_value_t = ClassifySettings::default().folds)]
    folds: usize,
    /// Decision threshold for accuracy and F1
    #[arg(long = "decision-threshold", id = "classify.threshold", default_value_t = ClassifySettings::default().threshold)]
    threshold: f64,
    /// Reweight classes to equal total weight
    #[arg(long, id = "classify.balanced")]
    balanced: bool,
    /// Logistic L2 penalty
    #[arg(long, id = "classify.logistic.l2", default_value_t = ClassifySettings::default().logistic.l2)]
    l2: f64,
    /// Logistic gradient-descent epochs
    #[arg(long, id = "classify.logistic.epochs", default_value_t = ClassifySettings::default().logistic.epochs)]
    logistic_epochs: usize,
    /// Tree depth limit
    #[arg(long, id = "classify.tree.max_depth", default_value_t = ClassifySettings::default().tree.max_depth)]
    tree_depth: usize,
    /// Boosting rounds
    #[arg(long, id = "classify.gbt.rounds", default_value_t = ClassifySettings::default().gbt.rounds)]
    rounds: usize,
    /// Boosting learning rate
    #[arg(long, id = "classify.gbt.learning_rate", default_value_t = ClassifySettings::default().gbt.learning_rate)]
    learning_rate: f64,
    /// Depth of each boosted tree
    #[arg(long, id = "classify.gbt.max_depth", default_value_t = ClassifySettings::default().gbt.max_depth)]
    gbt_depth: usize,
    /// Minimum samples per boosted-tree leaf
    #[arg(long, id = "classify.gbt.min_leaf", default_value_t = ClassifySettings::default().gbt.min_leaf)]
    min_leaf: usize,
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => return clap_failure(e),
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => return clap_failure(e),
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(&cli, leaf(&matches)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.category() {
                ErrorCategory::Usage => ("usage", 1),
                ErrorCategory::Input => ("input", 2),
                ErrorCategory::Schema => ("schema", 3),
            };
            fail(kind, code, &e.to_string())
        }
    }
}

fn clap_failure(e: clap::Error) -> ExitCode {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = e.print();
            ExitCode::SUCCESS
        }
        _ => fail("usage", 1, e.render().to_string().trim()),
    }
}

/// Machine-readable failure on stderr.
fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "code": code, "message": message }));
    ExitCode::from(code)
}

fn leaf(m: &ArgMatches) -> &ArgMatches {
    match m.subcommand() {
        Some((_, sub)) => leaf(sub),
        None => m,
    }
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.try_contains_id(id).unwrap_or(false) && m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Precedence, lowest first: defaults, NOTESFORGE_SEED, config file, `--set`, flags.
fn load_config(cli: &Cli, m: &ArgMatches) -> Result<RunConfig> {
    let usage = |e: Error| match e {
        Error::Io { .. } => e,
        other => Error::Config(other.to_string()),
    };
    let mut cfg = RunConfig::default();
    if let Ok(seed) = std::env::var("NOTESFORGE_SEED") {
        cfg.set("seed", seed.trim()).map_err(|e| Error::Config(format!("NOTESFORGE_SEED: {e}")))?;
    }
    if let Some(path) = &cli.config {
        cfg.apply_text(&read_to_string(path)?).map_err(usage)?;
    }
    for entry in &cli.set {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{entry}`")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    apply_flags(&mut cfg, m)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

/// Push every explicitly passed flag whose id is a config key into `cfg`.
fn apply_flags(cfg: &mut RunConfig, m: &ArgMatches) -> Result<()> {
    for id in m.ids() {
        let id = id.as_str();
        let is_key = id.contains('.') || matches!(id, "notes" | "transactions" | "vix" | "labels");
        if !is_key || m.value_source(id) != Some(ValueSource::CommandLine) {
            continue;
        }
        for raw in m.get_raw(id).into_iter().flatten() {
            cfg.set(id, &raw.to_string_lossy())?;
        }
    }
    Ok(())
}

/// A required input that was not given is reported like a missing file.
fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Io {
        path: PathBuf::from(format!("--{flag}")),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "not given on the command line or in the config"),
    })
}

fn load_notes(cfg: &RunConfig) -> Result<Vec<RawNote>> {
    read_notes_jsonl(open(required(&cfg.notes, "notes")?)?)
}

fn load_corpus(arg: &CorpusArg) -> Result<Vec<TokenDoc>> {
    read_corpus_jsonl(open(required(&arg.corpus, "corpus")?)?)
}

fn load_dataset(arg: &DatasetArg) -> Result<Dataset> {
    Dataset::from_table(&FeatureTable::read_csv(open(required(&arg.dataset, "dataset")?)?)?)
}

fn load_embedding(path: &Option<PathBuf>) -> Result<EmbeddingModel> {
    let path = required(path, "model")?;
    if path.extension().is_some_and(|e| e == "txt") {
        EmbeddingModel::read_text(open(path)?)
    } else {
        EmbeddingModel::load(path)
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    Ok(Inputs {
        notes: load_notes(cfg)?,
        transactions: read_transactions(open(required(&cfg.transactions, "transactions")?)?)?,
        vix: VixSeries::read_csv(open(required(&cfg.vix, "vix")?)?)?,
        labels: read_labels(open(required(&cfg.labels, "labels")?)?)?,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    write_file(path, |w| writeln!(w, "{text}"))
}

fn run(cli: &Cli, m: &ArgMatches) -> Result<()> {
    let cfg = load_config(cli, m)?;
    let out = cfg.output.as_path();
    match &cli.command {
        Command::Synth(cmd) => synth_cmd(cmd, m, &cfg),
        Command::Preprocess { .. } => {
            let notes = load_notes(&cfg)?;
            let pre = corpus::preprocess(&notes, &pipeline::preprocess_config(&cfg)?)?;
            write_file(&out.join("corpus.jsonl"), |w| corpus::write_corpus_jsonl(w, &pre.docs))?;
            write_file(&out.join("vocab.csv"), |w| pre.vocab.write_csv(w).map_err(std::io::Error::other))?;
            write_file(&out.join("phrases.csv"), |w| pre.phrases.write_csv(w))?;
            info!("{} notes, {} vocabulary tokens → {}", pre.docs.len(), pre.vocab.len(), out.display());
            Ok(())
        }
        Command::Stats { .. } => {
            let notes = load_notes(&cfg)?;
            corpus_stats(&notes, 100).write_csvs(out)?;
            info!("statistics for {} notes → {}", notes.len(), out.display());
            Ok(())
        }
        Command::Lda(LdaCmd::Fit { corpus, themes, .. }) => {
            let docs = load_corpus(corpus)?;
            let model = topicmodel::fit(&docs, &Vocabulary::from_docs(&docs), &cfg.lda_config())?;
            model.save(&out.join("lda"))?;
            report_topics(&model, cfg.coherence.top_n, themes.as_deref(), out)
        }
        Command::Lda(LdaCmd::Scan { corpus, k_values, .. }) => {
            let docs = load_corpus(corpus)?;
            let vocab = Vocabulary::from_docs(&docs);
            let scan = coherence::scan_topics(&docs, &vocab, k_values, &cfg.lda_config(), &cfg.coherence)?;
            coherence::write_curve_csv(&out.join("coherence_curve.csv"), &scan.curve)?;
            write_file(&out.join("chosen_k.txt"), |w| writeln!(w, "{}", scan.best_k))?;
            for p in &scan.curve {
                info!("k={:<3} mean C_v {:.4}", p.k, p.mean_cv);
            }
            emit(format!("chosen_k={}\n", scan.best_k).as_bytes())
        }
        Command::Coherence { corpus, model, .. } => {
            let docs = load_corpus(corpus)?;
            let model = LdaModel::load(required(model, "model")?)?;
            let scores = coherence::model_coherence(&model, &docs, &cfg.coherence)?;
            write_file(&out.join("coherence.csv"), |w| {
                writeln!(w, "topic,c_v,top_words")?;
                for (t, s) in scores.iter().enumerate() {
                    writeln!(w, "{t},{},{}", fmt_f64(*s), model.top_words(t, cfg.coherence.top_n).join(" "))?;
                }
                Ok(())
            })?;
            emit(format!("mean_c_v={}\n", fmt_f64(scores.iter().sum::<f64>() / scores.len() as f64)).as_bytes())
        }
        Command::Embed(EmbedCmd::Train { corpus, .. }) => {
            let docs = load_corpus(corpus)?;
            let (model, report) = embedding::train_with_report(&docs, &cfg.embedding_config())?;
            for (epoch, loss) in report.loss.iter().enumerate() {
                info!("epoch {epoch}: monitor loss {loss:.5}");
            }
            model.save(&out.join("embedding.json"))?;
            write_file(&out.join("vectors.txt"), |w| model.write_text(w))
        }
        Command::Embed(EmbedCmd::Similar { model, word, k }) => {
            let model = load_embedding(model)?;
            let mut table = format!("{:<24} Cosine similarity\n", "Word");
            for (w, s) in model.most_similar(word, *k)? {
                table += &format!("{w:<24} {s:.5}\n");
            }
            emit(table.as_bytes())
        }
        Command::Tag { corpus, model, .. } => {
            let docs = load_corpus(corpus)?;
            let notes = load_notes(&cfg)?;
            let model = load_embedding(model)?;
            let lexicons = pipeline::lexicon_specs(&cfg)?
                .iter()
                .map(|s| tagging::expand_lexicon(&model, s))
                .collect::<Result<Vec<_>>>()?;
            for lex in &lexicons {
                if !lex.warnings.is_empty() {
                    warn!("{}: seeds not in the vocabulary: {}", lex.topic, lex.warnings.join(", "));
                }
            }
            let events = tagging::tag_corpus(&docs, &notes, &lexicons)?;
            write_json(&out.join("lexicons.json"), &lexicons)?;
            tagging::write_events_csv(&out.join("events.csv"), &events)?;
            for lex in &lexicons {
                let n = events.iter().filter(|e| e.topic == lex.topic).count();
                info!("{}: {} words, {n} events", lex.topic, lex.expanded.len());
            }
            Ok(())
        }
        Command::Featurize { events, .. } => {
            let events = tagging::read_events(open(required(events, "events")?)?)?;
            let inputs = load_inputs(&cfg)?;
            let topics: Vec<String> = pipeline::lexicon_specs(&cfg)?.into_iter().map(|s| s.topic).collect();
            let as_of = match cfg.features.as_of {
                Some(d) => d,
                None => pipeline::latest_date(&inputs.notes, &inputs.transactions).ok_or(Error::EmptyCorpus)?,
            };
            let table = pipeline::featurize(&inputs, &events, &topics, as_of, &cfg)?;
            write_file(&out.join("dataset.csv"), |w| table.write_csv(w))?;
            info!("{} clients × {} features as of {as_of}", table.rows.len(), table.names.len());
            Ok(())
        }
        Command::Train { dataset, kind, .. } => {
            let data = load_dataset(dataset)?;
            let spec = kind.spec(&cfg.classify);
            let model = classify::train(&data, &spec)?;
            let fit = classify::metrics(&model.predict_all(&data)?, &data.y, cfg.classify.threshold)?;
            info!("{}: in-sample accuracy {:.4}, AUC {:?}", spec.name(), fit.accuracy, fit.auc);
            let json = model.to_json()?;
            write_file(&out.join(format!("models/{}.json", spec.name())), |w| w.write_all(json.as_bytes()))
        }
        Command::Evaluate { dataset, kinds, model, .. } => {
            let data = load_dataset(dataset)?;
            if let Some(path) = model {
                let model = TrainedModel::from_json(&read_to_string(path)?)?;
                let report = classify::metrics(&model.predict_all(&data)?, &data.y, cfg.classify.threshold)?;
                write_file(&out.join("roc.csv"), |w| classify::write_roc(w, &report.roc))?;
                return emit(format!("{}\n", classify::eval_json(&report)).as_bytes());
            }
            let mut reports = Vec::new();
            for kind in kinds {
                let spec = kind.spec(&cfg.classify);
                let cv = classify::cross_validate(&data, &spec, cfg.classify.folds, cfg.seed)?;
                write_cv(out, &cv)?;
                reports.push(cv);
            }
            emit(score_table(&reports).as_bytes())
        }
        Command::Importance { model, top, share_k } => {
            let model = TrainedModel::from_json(&read_to_string(required(model, "model")?)?)?;
            let ranking = model.feature_importance();
            let shown = if *top == 0 { ranking.len() } else { (*top).min(ranking.len()) };
            let mut csv = Vec::new();
            classify::write_importance(&mut csv, &ranking[..shown]).expect("writing to memory");
            if *share_k <= ranking.len() {
                info!("note-feature share of the top {share_k}: {:.2}", classify::top_k_source_share(&ranking, *share_k)?);
            }
            emit(&csv)
        }
        Command::Pipeline { synth, scenario, .. } => {
            let inputs = match synth {
                Some(source) => {
                    let mut spec = scenario_spec(Some(source), scenario, m)?;
                    spec.seed = cfg.seed;
                    let s = synth::gen_scenario(&spec)?;
                    s.write(&out.join("inputs"))?;
                    write_json(&out.join("inputs/scenario.json"), &spec)?;
                    Inputs { notes: s.notes, transactions: s.transactions, vix: s.vix, labels: s.labels }
                }
                None => load_inputs(&cfg)?,
            };
            info!("{} notes, {} trades, {} labeled clients", inputs.notes.len(), inputs.transactions.len(), inputs.labels.len());
            let outputs = pipeline::run(&inputs, &cfg)?;
            outputs.write(out)?;
            if let Some(lda) = &outputs.lda {
                report_topics(lda, cfg.coherence.top_n, None, out)?;
            }
            info!("outputs → {}", out.display());
            emit(score_table(&outputs.cv).as_bytes())
        }
    }
}

fn scenario_spec(source: Option<&str>, args: &ScenarioArgs, m: &ArgMatches) -> Result<ScenarioSpec> {
    let mut spec = match source {
        None | Some("default") => ScenarioSpec::default(),
        Some(path) => serde_json::from_str(&read_to_string(Path::new(path))?)
            .map_err(|e| Error::Parse { context: "scenario spec".into(), line: e.line(), message: e.to_string() })?,
    };
    if explicit(m, "clients") {
        spec.n_clients = args.clients;
    }
    if explicit(m, "beta_signal") {
        spec.beta_signal = args.beta_signal;
    }
    if explicit(m, "trade_signal") {
        spec.trade_signal = args.trade_signal;
    }
    Ok(spec)
}

fn synth_cmd(cmd: &SynthCmd, m: &ArgMatches, cfg: &RunConfig) -> Result<()> {
    let out = cfg.output.as_path();
    match cmd.kind {
        SynthKind::Scenario => {
            let source = cmd.spec.as_ref().map(|p| p.to_string_lossy().into_owned());
            let mut spec = scenario_spec(source.as_deref(), &cmd.scenario, m)?;
            spec.seed = cfg.seed;
            let s = synth::gen_scenario(&spec)?;
            s.write(out)?;
            write_json(&out.join("scenario.json"), &spec)?;
            let positives = s.labels.values().filter(|&&l| l == 1).count();
            info!("{} clients ({positives} cash-outs), {} notes, {} trades → {}", s.labels.len(), s.notes.len(), s.transactions.len(), out.display());
        }
        SynthKind::Topics => {
            let spec = TopicCorpusSpec { n_topics: cmd.topics, n_docs: cmd.docs, seed: cfg.seed, ..Default::default() };
            let c = synth::gen_topic_corpus(&spec)?;
            write_file(&out.join("notes.jsonl"), |w| corpus::write_notes_jsonl(w, &c.notes))?;
            write_file(&out.join("corpus.jsonl"), |w| corpus::write_corpus_jsonl(w, &c.docs))?;
            write_json(&out.join("topic_truth.json"), &c.truth)?;
            write_json(&out.join("topic_spec.json"), &spec)?;
            info!("{} documents over {} topics → {}", c.docs.len(), spec.n_topics, out.display());
        }
    }
    Ok(())
}

/// `topics.csv` (share of documents dominated by each topic, top words) and,
/// with a theme mapping, `themes.csv`.
fn report_topics(model: &LdaModel, top_n: usize, themes: Option<&Path>, out: &Path) -> Result<()> {
    let shares = model.dominant_shares();
    write_file(&out.join("topics.csv"), |w| {
        writeln!(w, "topic,share,top_words")?;
        for (t, s) in shares.iter().enumerate() {
            writeln!(w, "{t},{},{}", fmt_f64(*s), model.top_words(t, top_n).join(" "))?;
        }
        Ok(())
    })?;
    for (t, s) in shares.iter().enumerate() {
        info!("topic {t:>2} {:5.1}%  {}", 100.0 * s, model.top_words(t, top_n).join(" "));
    }
    if let Some(path) = themes {
        let map = topicmodel::parse_theme_map(&read_to_string(path)?, model.k())?;
        write_file(&out.join("themes.csv"), |w| {
            writeln!(w, "theme,share,topics")?;
            for (name, share, topics) in topicmodel::theme_shares(&shares, &map) {
                let ids: Vec<String> = topics.iter().map(|t| t.to_string()).collect();
                writeln!(w, "{name},{},{}", fmt_f64(share), ids.join(";"))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn write_cv(out: &Path, cv: &CvReport) -> Result<()> {
    let name = &cv.model;
    let json = cv.to_json();
    write_file(&out.join(format!("reports/{name}_cv.json")), |w| w.write_all(json.as_bytes()))?;
    write_file(&out.join(format!("reports/{name}_roc.csv")), |w| classify::write_roc(w, cv.representative_roc()))
}

/// Mean train/test scores, one column per model.
fn score_table(reports: &[CvReport]) -> String {
    let auc = |a: Option<f64>| a.map_or("-".to_string(), |v| format!("{v:.4}"));
    let mut out = format!("{:<12}", "Metrics");
    for r in reports {
        out += &format!(" {:>10}", r.model);
    }
    let rows: [(&str, &dyn Fn(&CvReport) -> String); 6] = [
        ("Acc (train)", &|r| format!("{:.4}", r.mean_train.accuracy)),
        ("Acc (test)", &|r| format!("{:.4}", r.mean_test.accuracy)),
        ("F1 (train)", &|r| format!("{:.4}", r.mean_train.weighted_f1)),
        ("F1 (test)", &|r| format!("{:.4}", r.mean_test.weighted_f1)),
        ("AUC (train)", &|r| auc(r.mean_train.auc)),
        ("AUC (test)", &|r| auc(r.mean_test.auc)),
    ];
    for (label, cell) in rows {
        out += &format!("\n{label:<12}");
        for r in reports {
            out += &format!(" {:>10}", cell(r));
        }
    }
    out + "\n"
}

/// Data to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(bytes: &[u8]) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(bytes).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io { path: "<stdout>".into(), source: e }),
        _ => Ok(()),
    }
}
