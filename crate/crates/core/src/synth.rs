//! Seeded synthetic data with planted ground truth: LDA-style topic corpora
//! and full client scenarios (notes, trades, VIX, cash-out labels).

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rand_distr::{Dirichlet, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::classify::sigmoid;
use crate::corpus::{write_notes_jsonl, RawNote, TokenDoc};
use crate::error::{Error, Result};
use crate::features::{write_labels, write_transactions, TransactionRecord, TxnType, VixSeries};
use crate::io::write_file;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicCorpusSpec {
    pub n_topics: usize,
    pub vocab_per_topic: usize,
    /// Words every topic can emit, named `s{i}`.
    pub shared_vocab: usize,
    pub n_docs: usize,
    pub doc_length: (usize, usize),
    /// Symmetric Dirichlet parameter for doc mixtures; 0 means one topic per doc.
    pub concentration: f64,
    /// Zipf exponent of word frequencies within a topic; 0 gives uniform words.
    pub word_skew: f64,
    pub seed: u64,
}

impl Default for TopicCorpusSpec {
    fn default() -> Self {
        TopicCorpusSpec {
            n_topics: 5,
            vocab_per_topic: 20,
            shared_vocab: 0,
            n_docs: 500,
            doc_length: (40, 80),
            concentration: 0.1,
            word_skew: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTruth {
    /// Per-doc topic mixture.
    pub mixtures: Vec<Vec<f64>>,
    /// Words owned by each topic (shared words excluded).
    pub topic_vocab: Vec<Vec<String>>,
    pub shared_vocab: Vec<String>,
    /// Topic that generated each token.
    pub assignments: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpus {
    pub notes: Vec<RawNote>,
    pub docs: Vec<TokenDoc>,
    pub truth: TopicTruth,
}

pub fn gen_topic_corpus(spec: &TopicCorpusSpec) -> Result<TopicCorpus> {
    let (lo, hi) = spec.doc_length;
    if spec.n_topics == 0 || spec.vocab_per_topic == 0 || spec.n_docs == 0 || lo == 0 || lo > hi {
        return Err(Error::Config("topic corpus counts must be >= 1 and doc_length ordered".into()));
    }
    if !(spec.concentration >= 0.0 && spec.concentration.is_finite()) {
        return Err(Error::Config("concentration must be finite and >= 0".into()));
    }
    if !(spec.word_skew >= 0.0 && spec.word_skew.is_finite()) {
        return Err(Error::Config("word_skew must be finite and >= 0".into()));
    }
    // Shared words get the mean topic-word weight, so their token share is
    // shared / (vocab_per_topic + shared) whatever the skew.
    let mut word_weights: Vec<f64> = (0..spec.vocab_per_topic).map(|r| (r as f64 + 1.0).powf(-spec.word_skew)).collect();
    let mean_w = word_weights.iter().sum::<f64>() / spec.vocab_per_topic as f64;
    word_weights.extend(std::iter::repeat_n(mean_w, spec.shared_vocab));
    let word_pick = WeightedIndex::new(&word_weights).map_err(|e| Error::Config(e.to_string()))?;
    let topic_vocab: Vec<Vec<String>> = (0..spec.n_topics)
        .map(|t| (0..spec.vocab_per_topic).map(|w| format!("t{t}w{w}")).collect())
        .collect();
    let shared: Vec<String> = (0..spec.shared_vocab).map(|i| format!("s{i}")).collect();
    let mut r = rng::stream(spec.seed, "topic-corpus");
    let dirichlet = if spec.concentration > 0.0 && spec.n_topics > 1 {
        Some(Dirichlet::new_with_size(spec.concentration, spec.n_topics).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let mut truth = TopicTruth { mixtures: Vec::new(), topic_vocab: topic_vocab.clone(), shared_vocab: shared.clone(), assignments: Vec::new() };
    let mut notes = Vec::with_capacity(spec.n_docs);
    let mut docs = Vec::with_capacity(spec.n_docs);
    for d in 0..spec.n_docs {
        let mixture: Vec<f64> = match &dirichlet {
            Some(dist) => {
                // Tiny concentrations can underflow to all zeros; fall back to one topic.
                let m = dist.sample(&mut r);
                if m.iter().all(|x| x.is_finite()) && m.iter().sum::<f64>() > 0.0 {
                    m
                } else {
                    one_hot(spec.n_topics, r.gen_range(0..spec.n_topics))
                }
            }
            None => one_hot(spec.n_topics, r.gen_range(0..spec.n_topics)),
        };
        let pick = WeightedIndex::new(&mixture).map_err(|e| Error::Config(e.to_string()))?;
        let len = r.gen_range(lo..=hi);
        let mut tokens = Vec::with_capacity(len);
        let mut z = Vec::with_capacity(len);
        for _ in 0..len {
            let t = pick.sample(&mut r);
            let w = word_pick.sample(&mut r);
            tokens.push(if w < spec.vocab_per_topic { topic_vocab[t][w].clone() } else { shared[w - spec.vocab_per_topic].clone() });
            z.push(t);
        }
        let id = format!("d{d:05}");
        notes.push(RawNote {
            note_id: id.clone(),
            advisor_id: "a0".into(),
            client_id: format!("c{d:05}"),
            date: start + Duration::days((d % 365) as i64),
            text: tokens.join(" "),
        });
        docs.push(TokenDoc { note_id: id, tokens });
        truth.mixtures.push(mixture);
        truth.assignments.push(z);
    }
    Ok(TopicCorpus { notes, docs, truth })
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Greedy topic-to-truth matching: repeatedly pair the learned and true
/// topics with the largest word overlap. Purity is matched overlap over the
/// total number of learned top words.
pub fn matching_purity(learned_top: &[Vec<String>], truth: &[Vec<String>]) -> f64 {
    let total: usize = learned_top.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let overlap: Vec<Vec<usize>> = learned_top
        .iter()
        .map(|top| truth.iter().map(|t| top.iter().filter(|w| t.contains(w)).count()).collect())
        .collect();
    let mut used_l = vec![false; learned_top.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matched = 0;
    for _ in 0..learned_top.len().min(truth.len()) {
        let mut best = None;
        for (i, row) in overlap.iter().enumerate().filter(|(i, _)| !used_l[*i]) {
            for (j, &o) in row.iter().enumerate().filter(|(j, _)| !used_t[*j]) {
                if best.is_none_or(|(_, _, b)| o > b) {
                    best = Some((i, j, o));
                }
            }
        }
        let (i, j, o) = best.expect("unmatched pairs remain");
        used_l[i] = true;
        used_t[j] = true;
        matched += o;
    }
    matched as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VixBlock {
    pub weeks: usize,
    pub volatile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub n_clients: usize,
    pub n_advisors: usize,
    /// Study window start; moved back to its Monday. The window spans the
    /// VIX block schedule.
    pub start: NaiveDate,
    pub base_rate: f64,
    /// Effect of latent anxiety on cash-out log-odds.
    pub beta_signal: f64,
    pub notes_per_client: (usize, usize),
    pub note_length: (usize, usize),
    /// Drawn log-uniformly, so activity levels are heavy-tailed.
    pub trades_per_client: (usize, usize),
    pub vix_regimes: Vec<VixBlock>,
    /// Expected volatility-topic tokens per volatile-week note per unit anxiety.
    pub topic_intensity: f64,
    /// Share of an anxious client's trades moved into volatile weeks (0 = none).
    pub trade_signal: f64,
    /// Anxiety above which a client's trades cluster.
    pub anxious_threshold: f64,
    pub misspelling_rate: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let block = |weeks, volatile| VixBlock { weeks, volatile };
        ScenarioSpec {
            n_clients: 2000,
            n_advisors: 40,
            start: NaiveDate::from_ymd_opt(2020, 1, 6).expect("valid date"),
            base_rate: 0.05,
            beta_signal: 2.0,
            notes_per_client: (4, 10),
            note_length: (12, 30),
            trades_per_client: (1, 100),
            vix_regimes: vec![
                block(8, false),
                block(6, true),
                block(12, false),
                block(4, true),
                block(10, false),
                block(6, true),
                block(6, false),
            ],
            topic_intensity: 4.5,
            trade_signal: 1.0,
            anxious_threshold: 1.0,
            misspelling_rate: 0.05,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return bad("base_rate must be in (0, 1)");
        }
        if self.weeks() < 8 {
            return bad("study window must span at least 8 weeks");
        }
        let ordered = |(lo, hi): (usize, usize)| lo <= hi;
        if self.n_clients == 0 || self.n_advisors == 0 || !ordered(self.notes_per_client) || !ordered(self.trades_per_client) {
            return bad("client/advisor counts must be >= 1 and ranges ordered");
        }
        if self.note_length.0 == 0 || !ordered(self.note_length) {
            return bad("note_length must be >= 1 and ordered");
        }
        if !self.anxious_threshold.is_finite() || !self.beta_signal.is_finite() || !(self.topic_intensity >= 0.0) || !(0.0..=1.0).contains(&self.trade_signal) {
            return bad("beta_signal and anxious_threshold finite, topic_intensity >= 0, trade_signal in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.misspelling_rate) {
            return bad("misspelling_rate must be in [0, 1]");
        }
        Ok(())
    }

    pub fn weeks(&self) -> usize {
        self.vix_regimes.iter().map(|b| b.weeks).sum()
    }

    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        let start = crate::features::week_start(self.start);
        (start, start + Duration::days(7 * self.weeks() as i64 - 1))
    }
}

const THEMES: [[&str; 12]; 6] = [
    ["retirement", "pension", "annuity", "income", "withdrawal", "medicare", "rollover", "ira", "budget", "travel", "plan", "social"],
    ["family", "daughter", "son", "grandchild", "wedding", "college", "tuition", "gift", "birthday", "spouse", "kid", "home"],
    ["tax", "deduction", "refund", "return", "accountant", "harvest", "loss", "gain", "bracket", "estimate", "cpa", "charity"],
    ["estate", "trust", "beneficiary", "attorney", "power", "probate", "heir", "inheritance", "document", "guardian", "update", "title"],
    ["insurance", "policy", "premium", "coverage", "umbrella", "disability", "claim", "health", "longterm", "care", "rider", "term"],
    ["portfolio", "allocation", "rebalance", "bond", "fund", "dividend", "equity", "yield", "cash", "review", "target", "benchmark"],
];

pub const VOLATILITY_WORDS: [&str; 10] = [
    "market", "volatility", "downturn", "selloff", "crash", "drop", "decline", "uncertainty", "turmoil", "correction",
];
pub const MISSPELLINGS: [&str; 3] = ["volatilty", "volitility", "volatily"];
pub const PEACE_OF_MIND_WORDS: [&str; 8] = ["concern", "panic", "sensitive", "anxious", "nervous", "fear", "worry", "reassure"];

const INSTRUMENTS: [&str; 12] = ["SPY", "AGG", "VTI", "QQQ", "IWM", "EFA", "TLT", "GLD", "VNQ", "LQD", "BND", "MMF"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTruth {
    pub client_id: String,
    pub advisor_id: String,
    pub anxiety: f64,
    pub cash_out_probability: f64,
    pub final_cash_share: f64,
    pub label: u8,
    /// Volatility-topic tokens injected into this client's notes.
    pub volatility_tokens: usize,
    pub misspellings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: ScenarioSpec,
    /// Label log-odds intercept, calibrated so the expected rate is `base_rate`.
    pub intercept: f64,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    /// Monday of each volatile week.
    pub volatile_weeks: Vec<NaiveDate>,
    pub clients: Vec<ClientTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub notes: Vec<RawNote>,
    pub transactions: Vec<TransactionRecord>,
    pub vix: VixSeries,
    pub labels: BTreeMap<String, u8>,
    pub truth: GroundTruth,
}

/// The cash-out rule: a client whose final allocation is entirely cash.
pub fn cash_out_label(final_cash_share: f64) -> u8 {
    (final_cash_share >= 1.0) as u8
}

/// Intercept `c` with `E[σ(c + β·a)] = base` for `a ~ N(0, 1)`.
pub fn calibrate_intercept(base: f64, beta: f64) -> f64 {
    let expected = |c: f64| {
        // trapezoid rule on [-10, 10]; the integrand is smooth and tails vanish
        let n = 4000;
        let h = 20.0 / n as f64;
        (0..=n)
            .map(|i| {
                let a = -10.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (-a * a / 2.0).exp() * sigmoid(c + beta * a)
            })
            .sum::<f64>()
            * h
            / (2.0 * std::f64::consts::PI).sqrt()
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if expected(mid) < base {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

pub fn gen_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let (start, end) = spec.window();
    let mut volatile_weeks = Vec::new();
    let mut week_volatile = Vec::new();
    for block in &spec.vix_regimes {
        for _ in 0..block.weeks {
            if block.volatile {
                volatile_weeks.push(start + Duration::days(7 * week_volatile.len() as i64));
            }
            week_volatile.push(block.volatile);
        }
    }
    let days: Vec<NaiveDate> = (0..=(end - start).num_days()).map(|i| start + Duration::days(i)).collect();
    let is_volatile = |d: NaiveDate| week_volatile[((d - start).num_days() / 7) as usize];
    let business: Vec<NaiveDate> = days.iter().copied().filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)).collect();
    let volatile_days: Vec<NaiveDate> = business.iter().copied().filter(|&d| is_volatile(d)).collect();

    let mut vr = rng::stream(spec.seed, "scenario/vix");
    let noise = Normal::new(0.0, 0.06).expect("valid normal");
    let vix = VixSeries::new(
        business
            .iter()
            .map(|&d| {
                let level = if is_volatile(d) { 34.0 } else { 15.0 };
                let z: f64 = noise.sample(&mut vr);
                (d, level * z.exp())
            })
            .collect(),
    )?;

    let intercept = calibrate_intercept(spec.base_rate, spec.beta_signal);
    let amount = LogNormal::new(5000f64.ln(), 1.0).expect("valid lognormal");
    let mut notes = Vec::new();
    let mut transactions = Vec::new();
    let mut labels = BTreeMap::new();
    let mut clients = Vec::with_capacity(spec.n_clients);
    let width = spec.n_clients.to_string().len().max(4);
    for c in 0..spec.n_clients {
        let client_id = format!("c{c:0width$}");
        let advisor_id = format!("a{:03}", c % spec.n_advisors);
        let mut r = rng::stream(spec.seed, &format!("scenario/client/{client_id}"));
        let anxiety: f64 = r.sample(rand_distr::StandardNormal);
        let drive = anxiety.max(0.0);

        let mut vol_tokens = 0;
        let mut misspellings = 0;
        let n_notes = r.gen_range(spec.notes_per_client.0..=spec.notes_per_client.1);
        for k in 0..n_notes {
            let date = days[r.gen_range(0..days.len())];
            let theme = &THEMES[r.gen_range(0..THEMES.len())];
            let len = r.gen_range(spec.note_length.0..=spec.note_length.1);
            let mut tokens: Vec<&str> = (0..len)
                .map(|_| {
                    let t = if r.gen::<f64>() < 0.8 { theme } else { &THEMES[r.gen_range(0..THEMES.len())] };
                    t[r.gen_range(0..t.len())]
                })
                .collect();
            let (lam_v, lam_p) = if is_volatile(date) {
                (0.3 + spec.topic_intensity * drive, 0.1 + 0.4 * spec.topic_intensity * drive)
            } else {
                (0.1, 0.05)
            };
            let n_vol = poisson(&mut r, lam_v);
            for _ in 0..n_vol {
                let mut w = VOLATILITY_WORDS[r.gen_range(0..VOLATILITY_WORDS.len())];
                if w == "volatility" && r.gen::<f64>() < spec.misspelling_rate {
                    w = MISSPELLINGS[r.gen_range(0..MISSPELLINGS.len())];
                    misspellings += 1;
                }
                tokens.insert(r.gen_range(0..=tokens.len()), w);
            }
            vol_tokens += n_vol;
            for _ in 0..poisson(&mut r, lam_p) {
                let w = PEACE_OF_MIND_WORDS[r.gen_range(0..PEACE_OF_MIND_WORDS.len())];
                tokens.insert(r.gen_range(0..=tokens.len()), w);
            }
            notes.push(RawNote {
                note_id: format!("{client_id}-n{k:02}"),
                advisor_id: advisor_id.clone(),
                client_id: client_id.clone(),
                date,
                text: tokens.join(" "),
            });
        }

        let n_accounts = r.gen_range(1..=3);
        let cluster = if anxiety > spec.anxious_threshold { spec.trade_signal } else { 0.0 };
        let n_trades = log_uniform(&mut r, spec.trades_per_client);
        for _ in 0..n_trades {
            let date = if !volatile_days.is_empty() && r.gen::<f64>() < cluster {
                volatile_days[r.gen_range(0..volatile_days.len())]
            } else {
                business[r.gen_range(0..business.len())]
            };
            let txn_type = TxnType::ALL[WeightedIndex::new([45, 35, 10, 10]).expect("static weights").sample(&mut r)];
            transactions.push(TransactionRecord {
                client_id: client_id.clone(),
                date,
                account_id: format!("{client_id}-acct{}", r.gen_range(0..n_accounts)),
                instrument: INSTRUMENTS[r.gen_range(0..INSTRUMENTS.len())].to_string(),
                txn_type,
                amount: (amount.sample(&mut r) * 100.0).round() / 100.0,
            });
        }

        let p = sigmoid(intercept + spec.beta_signal * anxiety);
        let cashed = r.gen::<f64>() < p;
        let final_cash_share = if cashed { 1.0 } else { r.gen_range(0.0..0.9) };
        let label = cash_out_label(final_cash_share);
        labels.insert(client_id.clone(), label);
        clients.push(ClientTruth {
            client_id,
            advisor_id,
            anxiety,
            cash_out_probability: p,
            final_cash_share,
            label,
            volatility_tokens: vol_tokens,
            misspellings,
        });
    }
    notes.sort_by(|a, b| a.note_id.cmp(&b.note_id));
    transactions.sort_by(|a, b| (&a.client_id, a.date).cmp(&(&b.client_id, b.date)));
    Ok(Scenario {
        notes,
        transactions,
        vix,
        labels,
        truth: GroundTruth { spec: spec.clone(), intercept, window_start: start, window_end: end, volatile_weeks, clients },
    })
}

/// Integer drawn log-uniformly from `lo..=hi` (heavy-tailed activity levels).
fn log_uniform(r: &mut rng::Rng, (lo, hi): (usize, usize)) -> usize {
    let (a, b) = ((lo.max(1) as f64).ln(), ((hi.max(1) + 1) as f64).ln());
    let v = r.gen_range(a..b.max(a + f64::EPSILON)).exp().floor() as usize;
    v.clamp(lo, hi)
}

fn poisson(r: &mut rng::Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(r) as usize
}

impl Scenario {
    /// Write notes.jsonl, transactions.csv, vix.csv, labels.csv and
    /// ground_truth.json into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("notes.jsonl"), |w| write_notes_jsonl(w, &self.notes))?;
        write_file(&dir.join("transactions.csv"), |w| write_transactions(w, &self.transactions))?;
        write_file(&dir.join("vix.csv"), |w| self.vix.write_csv(w))?;
        write_file(&dir.join("labels.csv"), |w| write_labels(w, &self.labels))?;
        let json = serde_json::to_string_pretty(&self.truth).expect("ground truth serializes");
        write_file(&dir.join("ground_truth.json"), |w| w.write_all(json.as_bytes()))
    }
}
