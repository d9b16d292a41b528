//! LDA fitted by collapsed Gibbs sampling.
//!
//! Each document owns an RNG stream derived from `(seed, note_id)`, so a
//! document's draws do not depend on where it sits in the corpus. Two sweep
//! schedules are provided:
//!
//! * [`SweepMode::Sequential`] updates the shared topic-word counts after every
//!   token (the textbook sampler, and the default).
//! * [`SweepMode::Synchronous`] lets every document sample against the counts
//!   as they stood at the start of the sweep plus its own pending changes, and
//!   merges all changes at the sweep boundary. Results are then invariant to
//!   document order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, numbered_lines, open, read_to_string, write_file};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Sequential,
    Synchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric doc-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Average phi/theta over every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: SweepMode,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 20,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            thin: 10,
            seed: 0,
            mode: SweepMode::Sequential,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.alpha() > 0.0) || !(self.beta > 0.0) {
            return bad("alpha and beta must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.burn_in >= self.iterations {
            return bad("burn_in must be smaller than iterations");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub config: LdaConfig,
    pub vocab: Vocabulary,
    pub doc_ids: Vec<String>,
    /// k × V
    pub topic_word_counts: Vec<Vec<u32>>,
    /// D × k
    pub doc_topic_counts: Vec<Vec<u32>>,
    pub topic_totals: Vec<u64>,
    /// Topic of every token position, per document.
    pub assignments: Vec<Vec<u32>>,
    /// k × V, rows sum to 1.
    pub phi: Vec<Vec<f64>>,
    /// D × k, rows sum to 1.
    pub theta: Vec<Vec<f64>>,
}

/// Observer called after each full sweep with the 1-based sweep number.
pub type SweepHook<'a> = &'a mut dyn FnMut(usize, &SamplerState);

/// Mutable sampler state, exposed read-only to sweep observers.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub words: Vec<Vec<usize>>,
    pub assignments: Vec<Vec<u32>>,
    pub topic_word: Vec<Vec<u32>>,
    pub doc_topic: Vec<Vec<u32>>,
    pub topic_totals: Vec<u64>,
}

impl SamplerState {
    /// Both count matrices tally the assignments exactly.
    pub fn check_counts(&self, k: usize, v: usize) -> bool {
        let mut tw = vec![vec![0u32; v]; k];
        let mut totals = vec![0u64; k];
        for (d, (ws, zs)) in self.words.iter().zip(&self.assignments).enumerate() {
            let mut dt = vec![0u32; k];
            for (&w, &z) in ws.iter().zip(zs) {
                tw[z as usize][w] += 1;
                dt[z as usize] += 1;
                totals[z as usize] += 1;
            }
            if dt != self.doc_topic[d] {
                return false;
            }
        }
        tw == self.topic_word && totals == self.topic_totals
    }
}

fn encode(corpus: &[TokenDoc], vocab: &Vocabulary) -> Result<Vec<Vec<usize>>> {
    corpus
        .iter()
        .map(|d| {
            d.tokens
                .iter()
                .map(|t| vocab.index_of(t).ok_or_else(|| Error::UnknownToken(t.clone())))
                .collect()
        })
        .collect()
}

/// Draw an index from unnormalized nonnegative weights.
fn draw(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0 && total.is_finite());
    debug_assert!({
        let normalized: f64 = weights.iter().map(|w| w / total).sum();
        (normalized - 1.0).abs() <= 1e-12
    });
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub fn fit(corpus: &[TokenDoc], vocab: &Vocabulary, config: &LdaConfig) -> Result<LdaModel> {
    fit_observed(corpus, vocab, config, &mut |_, _| {})
}

/// [`fit`] with a callback after every sweep.
pub fn fit_observed(
    corpus: &[TokenDoc],
    vocab: &Vocabulary,
    config: &LdaConfig,
    hook: SweepHook<'_>,
) -> Result<LdaModel> {
    config.validate()?;
    if corpus.is_empty() || corpus.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let words = encode(corpus, vocab)?;
    let k = config.k;
    let v = vocab.len();
    let alpha = config.alpha();
    let beta = config.beta;
    let v_beta = v as f64 * beta;

    let mut rngs: Vec<Rng> = corpus.iter().map(|d| rng::stream(config.seed, &d.note_id)).collect();
    let mut state = SamplerState {
        assignments: Vec::with_capacity(words.len()),
        topic_word: vec![vec![0u32; v]; k],
        doc_topic: vec![vec![0u32; k]; words.len()],
        topic_totals: vec![0u64; k],
        words,
    };
    for (d, ws) in state.words.iter().enumerate() {
        let zs: Vec<u32> = ws.iter().map(|_| rngs[d].gen_range(0..k) as u32).collect();
        for (&w, &z) in ws.iter().zip(&zs) {
            state.topic_word[z as usize][w] += 1;
            state.doc_topic[d][z as usize] += 1;
            state.topic_totals[z as usize] += 1;
        }
        state.assignments.push(zs);
    }

    let mut phi_sum = vec![vec![0.0; v]; k];
    let mut theta_sum = vec![vec![0.0; k]; state.words.len()];
    let mut samples = 0usize;
    let mut weights = vec![0.0; k];

    for sweep in 1..=config.iterations {
        match config.mode {
            SweepMode::Sequential => {
                let SamplerState {
                    words,
                    assignments,
                    topic_word,
                    doc_topic,
                    topic_totals,
                } = &mut state;
                for d in 0..words.len() {
                    let rng = &mut rngs[d];
                    for (i, &w) in words[d].iter().enumerate() {
                        let old = assignments[d][i] as usize;
                        topic_word[old][w] -= 1;
                        doc_topic[d][old] -= 1;
                        topic_totals[old] -= 1;
                        for t in 0..k {
                            weights[t] = (doc_topic[d][t] as f64 + alpha) * (topic_word[t][w] as f64 + beta)
                                / (topic_totals[t] as f64 + v_beta);
                        }
                        let new = draw(&weights, rng);
                        assignments[d][i] = new as u32;
                        topic_word[new][w] += 1;
                        doc_topic[d][new] += 1;
                        topic_totals[new] += 1;
                    }
                }
            }
            SweepMode::Synchronous => synchronous_sweep(&mut state, &mut rngs, alpha, beta, v_beta, &mut weights),
        }
        hook(sweep, &state);

        let sampled = sweep > config.burn_in && (sweep - config.burn_in).is_multiple_of(config.thin);
        if sampled || (sweep == config.iterations && samples == 0) {
            accumulate(&state, alpha, beta, &mut phi_sum, &mut theta_sum);
            samples += 1;
        }
    }

    let n = samples as f64;
    let phi = phi_sum
        .into_iter()
        .map(|row| normalize(row.into_iter().map(|x| x / n).collect()))
        .collect();
    let theta = theta_sum
        .into_iter()
        .map(|row| normalize(row.into_iter().map(|x| x / n).collect()))
        .collect();
    Ok(LdaModel {
        config: config.clone(),
        vocab: vocab.clone(),
        doc_ids: corpus.iter().map(|d| d.note_id.clone()).collect(),
        topic_word_counts: state.topic_word,
        doc_topic_counts: state.doc_topic,
        topic_totals: state.topic_totals,
        assignments: state.assignments,
        phi,
        theta,
    })
}

fn synchronous_sweep(
    state: &mut SamplerState,
    rngs: &mut [Rng],
    alpha: f64,
    beta: f64,
    v_beta: f64,
    weights: &mut [f64],
) {
    let k = weights.len();
    // Pending (topic, word) deltas per document, applied after the sweep.
    let mut deltas: Vec<HashMap<(usize, usize), i64>> = Vec::with_capacity(state.words.len());
    let mut total_deltas = vec![0i64; k];
    for d in 0..state.words.len() {
        let mut local: HashMap<(usize, usize), i64> = HashMap::new();
        let mut local_totals = vec![0i64; k];
        for (i, &w) in state.words[d].iter().enumerate() {
            let old = state.assignments[d][i] as usize;
            *local.entry((old, w)).or_default() -= 1;
            local_totals[old] -= 1;
            state.doc_topic[d][old] -= 1;
            for t in 0..k {
                let tw = state.topic_word[t][w] as i64 + local.get(&(t, w)).copied().unwrap_or(0);
                let tt = state.topic_totals[t] as i64 + local_totals[t];
                weights[t] = (state.doc_topic[d][t] as f64 + alpha) * (tw.max(0) as f64 + beta)
                    / (tt.max(0) as f64 + v_beta);
            }
            let new = draw(weights, &mut rngs[d]);
            state.assignments[d][i] = new as u32;
            *local.entry((new, w)).or_default() += 1;
            local_totals[new] += 1;
            state.doc_topic[d][new] += 1;
        }
        for (t, dt) in local_totals.iter().enumerate() {
            total_deltas[t] += dt;
        }
        deltas.push(local);
    }
    for local in deltas {
        for ((t, w), delta) in local {
            state.topic_word[t][w] = (state.topic_word[t][w] as i64 + delta) as u32;
        }
    }
    for (t, delta) in total_deltas.into_iter().enumerate() {
        state.topic_totals[t] = (state.topic_totals[t] as i64 + delta) as u64;
    }
}

fn accumulate(state: &SamplerState, alpha: f64, beta: f64, phi_sum: &mut [Vec<f64>], theta_sum: &mut [Vec<f64>]) {
    let k = phi_sum.len();
    let v = phi_sum.first().map_or(0, Vec::len);
    for t in 0..k {
        let denom = state.topic_totals[t] as f64 + v as f64 * beta;
        for w in 0..v {
            phi_sum[t][w] += (state.topic_word[t][w] as f64 + beta) / denom;
        }
    }
    for (d, row) in theta_sum.iter_mut().enumerate() {
        let n_d = state.words[d].len() as f64;
        let denom = n_d + k as f64 * alpha;
        for t in 0..k {
            row[t] += (state.doc_topic[d][t] as f64 + alpha) / denom;
        }
    }
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|x| *x /= s);
    }
    row
}

impl LdaModel {
    pub fn k(&self) -> usize {
        self.config.k
    }

    /// `n` highest-probability tokens of `topic`, ties broken lexicographically.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<String> {
        let row = &self.phi[topic];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| {
            row[b]
                .total_cmp(&row[a])
                .then_with(|| self.vocab.tokens()[a].cmp(&self.vocab.tokens()[b]))
        });
        idx.into_iter()
            .take(n)
            .map(|i| self.vocab.tokens()[i].clone())
            .collect()
    }

    /// Argmax of the document's topic distribution; ties go to the lowest id.
    pub fn dominant_topic(&self, doc: usize) -> (usize, f64) {
        argmax(&self.theta[doc])
    }

    /// Share of documents whose dominant topic is each topic.
    pub fn dominant_shares(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.k()];
        for d in 0..self.theta.len() {
            counts[self.dominant_topic(d).0] += 1;
        }
        let n = self.theta.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    /// Fold-in Gibbs inference for an unseen document with the topics held
    /// fixed. Returns the averaged doc-topic distribution of the second half
    /// of the sweeps.
    pub fn infer_doc(&self, doc: &TokenDoc, sweeps: usize, seed: u64) -> Inference {
        let k = self.k();
        let alpha = self.config.alpha();
        let words: Vec<usize> = doc.tokens.iter().filter_map(|t| self.vocab.index_of(t)).collect();
        let dropped = doc.tokens.len() - words.len();
        if words.is_empty() {
            return Inference {
                theta: vec![1.0 / k as f64; k],
                out_of_vocabulary: dropped,
                all_out_of_vocabulary: !doc.tokens.is_empty(),
            };
        }
        let mut rng = rng::stream(seed, &doc.note_id);
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.gen_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();
        let sweeps = sweeps.max(1);
        let keep_from = sweeps / 2;
        let mut sum = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let denom = words.len() as f64 + k as f64 * alpha;
        for s in 0..sweeps {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                for t in 0..k {
                    weights[t] = (counts[t] as f64 + alpha) * self.phi[t][w];
                }
                z[i] = draw(&weights, &mut rng);
                counts[z[i]] += 1;
            }
            if s >= keep_from {
                for t in 0..k {
                    sum[t] += (counts[t] as f64 + alpha) / denom;
                }
            }
        }
        Inference {
            theta: normalize(sum),
            out_of_vocabulary: dropped,
            all_out_of_vocabulary: false,
        }
    }

    /// Write `lda.json` (header), `phi.csv`, `theta.csv` and
    /// `assignments.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let header = ModelHeader {
            format: MODEL_FORMAT.to_string(),
            config: self.config.clone(),
            vocab_hash: self.vocab.fingerprint(),
            k: self.k(),
            v: self.vocab.len(),
            d: self.doc_ids.len(),
            vocab: self.vocab.tokens().to_vec(),
            vocab_counts: self.vocab.counts().to_vec(),
            doc_ids: self.doc_ids.clone(),
        };
        write_file(&dir.join("lda.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &header)?;
            writeln!(w)
        })?;
        write_matrix(&dir.join("phi.csv"), "topic", self.vocab.tokens(), &self.phi)?;
        let topics: Vec<String> = (0..self.k()).map(|t| format!("topic_{t}")).collect();
        write_matrix(&dir.join("theta.csv"), "note_id", &topics, &self.theta)?;
        let counts: Vec<Vec<f64>> = self
            .topic_word_counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64).collect())
            .collect();
        write_matrix(&dir.join("topic_word_counts.csv"), "topic", self.vocab.tokens(), &counts)?;
        write_file(&dir.join("assignments.jsonl"), |w| {
            for z in &self.assignments {
                serde_json::to_writer(&mut *w, z)?;
                writeln!(w)?;
            }
            Ok(())
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: ModelHeader = serde_json::from_str(&read_to_string(&dir.join("lda.json"))?)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", header.format)));
        }
        if header.vocab.len() != header.v || header.vocab_counts.len() != header.v || header.doc_ids.len() != header.d
        {
            return Err(Error::ModelFormat("header sizes disagree".into()));
        }
        let vocab = Vocabulary::from_parts(header.vocab, header.vocab_counts)?;
        if vocab.fingerprint() != header.vocab_hash {
            return Err(Error::ModelFormat("vocabulary hash mismatch".into()));
        }
        let (k, v, d) = (header.k, header.v, header.d);
        let phi = read_matrix(&dir.join("phi.csv"), k, v)?;
        let theta = read_matrix(&dir.join("theta.csv"), d, k)?;
        let mut assignments = Vec::with_capacity(d);
        for (line, text) in numbered_lines(open(&dir.join("assignments.jsonl"))?) {
            let text = text.map_err(|e| Error::parse("assignments", line, e))?;
            let z: Vec<u32> = serde_json::from_str(&text).map_err(|e| Error::parse("assignments", line, e))?;
            if z.iter().any(|&t| t as usize >= k) {
                return Err(Error::parse("assignments", line, "topic id out of range"));
            }
            assignments.push(z);
        }
        if assignments.len() != d {
            return Err(Error::ModelFormat("assignment rows disagree with header".into()));
        }
        let topic_word_counts: Vec<Vec<u32>> = read_matrix(&dir.join("topic_word_counts.csv"), k, v)?
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as u32).collect())
            .collect();
        let doc_topic_counts: Vec<Vec<u32>> = assignments
            .iter()
            .map(|z| {
                let mut c = vec![0u32; k];
                z.iter().for_each(|&t| c[t as usize] += 1);
                c
            })
            .collect();
        let topic_totals: Vec<u64> = topic_word_counts
            .iter()
            .map(|row| row.iter().map(|&c| c as u64).sum())
            .collect();
        let from_docs: u64 = doc_topic_counts.iter().flatten().map(|&c| c as u64).sum();
        if from_docs != topic_totals.iter().sum::<u64>() {
            return Err(Error::ModelFormat("topic-word counts disagree with assignments".into()));
        }
        Ok(LdaModel {
            config: header.config,
            vocab,
            doc_ids: header.doc_ids,
            topic_word_counts,
            doc_topic_counts,
            topic_totals,
            assignments,
            phi,
            theta,
        })
    }
}

/// Parse a `topic,theme` CSV mapping topic ids to user-chosen themes.
pub fn parse_theme_map(text: &str, k: usize) -> Result<BTreeMap<usize, String>> {
    let mut map = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse("theme map", 1, e))?.clone();
    if headers.len() != 2 || &headers[0] != "topic" || &headers[1] != "theme" {
        return Err(Error::Schema("theme map header must be `topic,theme`".into()));
    }
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse("theme map", line, e))?;
        let topic: usize = row[0].trim().parse().map_err(|_| Error::parse("theme map", line, "bad topic id"))?;
        let theme = row[1].trim();
        if topic >= k {
            return Err(Error::parse("theme map", line, format!("topic {topic} out of range for k={k}")));
        }
        if theme.is_empty() {
            return Err(Error::parse("theme map", line, "empty theme"));
        }
        if map.insert(topic, theme.to_string()).is_some() {
            return Err(Error::parse("theme map", line, format!("topic {topic} mapped twice")));
        }
    }
    Ok(map)
}

/// Sum per-topic shares into themes. Unmapped topics stay on their own as
/// `topic_{t}`. Sorted by share, descending, then name.
pub fn theme_shares(shares: &[f64], map: &BTreeMap<usize, String>) -> Vec<(String, f64, Vec<usize>)> {
    let mut themes: BTreeMap<String, (f64, Vec<usize>)> = BTreeMap::new();
    for (t, &s) in shares.iter().enumerate() {
        let name = map.get(&t).cloned().unwrap_or_else(|| format!("topic_{t}"));
        let entry = themes.entry(name).or_default();
        entry.0 += s;
        entry.1.push(t);
    }
    let mut out: Vec<(String, f64, Vec<usize>)> = themes.into_iter().map(|(n, (s, ts))| (n, s, ts)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in row.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub theta: Vec<f64>,
    pub out_of_vocabulary: usize,
    /// Set when the document had tokens but none were in the vocabulary.
    pub all_out_of_vocabulary: bool,
}

const MODEL_FORMAT: &str = "notesforge-lda/1";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    config: LdaConfig,
    vocab_hash: String,
    k: usize,
    v: usize,
    d: usize,
    vocab: Vec<String>,
    vocab_counts: Vec<u64>,
    doc_ids: Vec<String>,
}

fn write_matrix(path: &Path, row_label: &str, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let file = crate::io::create(path)?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| Error::Schema(e.to_string());
    let mut header = vec![row_label.to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let ctx = path.display().to_string();
    let mut out = Vec::with_capacity(rows);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(ctx.clone(), i + 2, e))?;
        if rec.len() != cols + 1 {
            return Err(Error::parse(ctx.clone(), i + 2, format!("expected {} columns", cols + 1)));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|x| x.parse::<f64>().map_err(|e| Error::parse(ctx.clone(), i + 2, e)))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    if out.len() != rows {
        return Err(Error::ModelFormat(format!("{ctx}: expected {rows} rows, found {}", out.len())));
    }
    Ok(out)
}
