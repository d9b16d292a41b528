//! Skip-gram word embeddings trained with negative sampling.
//!
//! Training is single-threaded and fully determined by the seed. For each
//! center token `c` and every context token `o` at offset `1..=window`, one
//! SGD step ascends `log σ(u_o·v_c) + Σ log σ(−u_n·v_c)` over `negatives`
//! noise words drawn from the unigram distribution raised to 0.75.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, numbered_lines, read_to_string, write_file};
use crate::rng;

const MODEL_FORMAT: &str = "notesforge-embedding/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub seed: u64,
    /// Frequent-word subsampling threshold (word2vec's `sample`); off by default.
    pub subsample: Option<f64>,
    /// Fraction of documents withheld from training to measure loss.
    pub holdout_fraction: f64,
    /// Number of (center, context) pairs in the loss monitor sample.
    pub monitor_pairs: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 2,
            min_count: 20,
            negatives: 20,
            epochs: 5,
            lr_initial: 0.025,
            lr_final: 1e-4,
            seed: 0,
            subsample: None,
            holdout_fraction: 0.0,
            monitor_pairs: 2000,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.lr_final < self.lr_initial) || self.lr_final < 0.0 {
            return bad("need 0 <= lr_final < lr_initial");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must be in [0, 1)");
        }
        if self.subsample.is_some_and(|t| !(t > 0.0)) {
            return bad("subsample threshold must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub config: EmbeddingConfig,
    pub vocab: Vocabulary,
    /// Row-major `V × dim`.
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Per-epoch mean negative log-likelihood on the monitor sample. Entry 0 is
/// before any training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub loss: Vec<f64>,
    pub held_out_docs: usize,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative SGNS log-likelihood of one (center, context) pair.
pub fn pair_loss(center: &[f64], context: &[f64], noise: &[&[f64]]) -> f64 {
    -ln_sigmoid(dot(context, center)) - noise.iter().map(|u| ln_sigmoid(-dot(u, center))).sum::<f64>()
}

/// Gradients of [`pair_loss`]: (d/d center, d/d context, d/d each noise vector).
pub fn pair_gradients(center: &[f64], context: &[f64], noise: &[&[f64]]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let g_pos = sigmoid(dot(context, center)) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context = center.iter().map(|v| g_pos * v).collect();
    let mut d_noise = Vec::with_capacity(noise.len());
    for u in noise {
        let g = sigmoid(dot(u, center));
        for (dc, x) in d_center.iter_mut().zip(u.iter()) {
            *dc += g * x;
        }
        d_noise.push(center.iter().map(|v| g * v).collect());
    }
    (d_center, d_context, d_noise)
}

/// One SGD step on a pair; returns nothing, updates rows in place. Noise
/// rows equal to the context row are skipped, as in word2vec.
#[allow(clippy::too_many_arguments)]
fn sgd_step(input: &mut [f64], output: &mut [f64], dim: usize, c: usize, o: usize, noise: &[usize], lr: f64, grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let v = &input[c * dim..(c + 1) * dim];
    for (target, label) in std::iter::once((o, 1.0)).chain(noise.iter().filter(|&&n| n != o).map(|&n| (n, 0.0))) {
        let u = &mut output[target * dim..(target + 1) * dim];
        let g = (label - sigmoid(dot(u, v))) * lr;
        for ((gi, ui), vi) in grad.iter_mut().zip(u.iter_mut()).zip(v) {
            *gi += g * *ui;
            *ui += g * vi;
        }
    }
    for (vi, gi) in input[c * dim..(c + 1) * dim].iter_mut().zip(grad.iter()) {
        *vi += gi;
    }
}

/// Noise distribution proportional to `count^0.75`.
pub fn noise_distribution(vocab: &Vocabulary) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))
}

fn encode(docs: &[TokenDoc], vocab: &Vocabulary) -> Vec<Vec<usize>> {
    docs.iter()
        .map(|d| d.tokens.iter().filter_map(|t| vocab.index_of(t)).collect())
        .collect()
}

fn pairs_of(doc: &[usize], window: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..doc.len()).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(doc.len());
        (lo..hi).filter(move |&j| j != i).map(move |j| (doc[i], doc[j]))
    })
}

pub fn train(corpus: &[TokenDoc], config: &EmbeddingConfig) -> Result<EmbeddingModel> {
    train_with_report(corpus, config).map(|(m, _)| m)
}

pub fn train_with_report(corpus: &[TokenDoc], config: &EmbeddingConfig) -> Result<(EmbeddingModel, TrainReport)> {
    config.validate()?;
    let vocab = Vocabulary::from_docs(corpus).pruned(config.min_count.max(1));
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dim = config.dim;
    let v = vocab.len();
    let noise = noise_distribution(&vocab)?;

    let mut init = rng::stream(config.seed, "embedding/init");
    let half = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..v * dim).map(|_| init.gen_range(-half..half)).collect();
    let mut output = vec![0.0; v * dim];

    let encoded = encode(corpus, &vocab);
    let (train_docs, held): (Vec<_>, Vec<_>) = encoded.iter().enumerate().partition(|(i, _)| {
        config.holdout_fraction == 0.0 || {
            let mut r = rng::stream(config.seed, &format!("embedding/holdout/{}", corpus[*i].note_id));
            r.gen::<f64>() >= config.holdout_fraction
        }
    });
    let train_docs: Vec<&Vec<usize>> = train_docs.into_iter().map(|(_, d)| d).collect();
    let monitor_docs: Vec<&Vec<usize>> = if held.iter().any(|(_, d)| d.len() > 1) {
        held.iter().map(|(_, d)| *d).collect()
    } else {
        train_docs.clone()
    };
    let monitor = monitor_sample(&monitor_docs, config, &noise);
    let mut report = TrainReport {
        loss: vec![monitor_loss(&monitor, &input, &output, dim)],
        held_out_docs: held.len(),
    };

    let keep_prob: Option<Vec<f64>> = config.subsample.map(|t| {
        let total = vocab.total() as f64;
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64 / total;
                ((t / f).sqrt() + t / f).min(1.0)
            })
            .collect()
    });

    let tokens_per_epoch: usize = train_docs.iter().map(|d| d.len()).sum();
    let total_steps = (tokens_per_epoch * config.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut draw = rng::stream(config.seed, "embedding/train");
    let mut grad = vec![0.0; dim];
    let mut negs = vec![0usize; config.negatives];
    let mut kept: Vec<usize> = Vec::new();
    for _ in 0..config.epochs {
        for doc in &train_docs {
            let doc: &[usize] = match &keep_prob {
                Some(p) => {
                    kept.clear();
                    kept.extend(doc.iter().copied().filter(|&w| draw.gen::<f64>() < p[w]));
                    &kept
                }
                None => doc,
            };
            for i in 0..doc.len() {
                let lr = config.lr_initial - (config.lr_initial - config.lr_final) * (step as f64 / total_steps);
                step += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(doc.len());
                for j in (lo..hi).filter(|&j| j != i) {
                    negs.iter_mut().for_each(|n| *n = noise.sample(&mut draw));
                    sgd_step(&mut input, &mut output, dim, doc[i], doc[j], &negs, lr, &mut grad);
                }
            }
        }
        report.loss.push(monitor_loss(&monitor, &input, &output, dim));
    }
    Ok((
        EmbeddingModel {
            config: config.clone(),
            vocab,
            input,
            output,
        },
        report,
    ))
}

type MonitorPair = (usize, usize, Vec<usize>);

fn monitor_sample(docs: &[&Vec<usize>], config: &EmbeddingConfig, noise: &WeightedIndex<f64>) -> Vec<MonitorPair> {
    let all: Vec<(usize, usize)> = docs.iter().flat_map(|d| pairs_of(d, config.window)).collect();
    if all.is_empty() {
        return Vec::new();
    }
    let mut r = rng::stream(config.seed, "embedding/monitor");
    (0..config.monitor_pairs.min(all.len()))
        .map(|_| {
            let (c, o) = all[r.gen_range(0..all.len())];
            let negs = (0..config.negatives)
                .map(|_| noise.sample(&mut r))
                .filter(|&n| n != o)
                .collect();
            (c, o, negs)
        })
        .collect()
}

fn monitor_loss(sample: &[MonitorPair], input: &[f64], output: &[f64], dim: usize) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let row = |m: &[f64], i: usize| m[i * dim..(i + 1) * dim].to_vec();
    let total: f64 = sample
        .iter()
        .map(|(c, o, negs)| {
            let noise: Vec<Vec<f64>> = negs.iter().map(|&n| row(output, n)).collect();
            let refs: Vec<&[f64]> = noise.iter().map(Vec::as_slice).collect();
            pair_loss(&row(input, *c), &row(output, *o), &refs)
        })
        .sum();
    total / sample.len() as f64
}

/// Cosine similarity; errors if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    dim: usize,
    config: EmbeddingConfig,
    vocab: Vec<String>,
    counts: Vec<u64>,
    input: Vec<Vec<f64>>,
    output: Vec<Vec<f64>>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.index_of(word).map(|i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim()..(i + 1) * self.dim()]
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let va = self.vector(a).ok_or_else(|| Error::UnknownToken(a.to_string()))?;
        let vb = self.vector(b).ok_or_else(|| Error::UnknownToken(b.to_string()))?;
        cosine(va, vb)
    }

    /// Cosine of `word` against every vocabulary row, by index; zero rows score 0.
    pub fn similarities(&self, word: &str) -> Result<Vec<f64>> {
        let q = self.vector(word).ok_or_else(|| Error::UnknownToken(word.to_string()))?;
        let nq = dot(q, q).sqrt();
        if nq == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok((0..self.vocab.len())
            .map(|i| {
                let r = self.row(i);
                let nr = dot(r, r).sqrt();
                if nr == 0.0 {
                    0.0
                } else {
                    (dot(q, r) / (nq * nr)).clamp(-1.0, 1.0)
                }
            })
            .collect())
    }

    /// Top `k` other words by cosine, descending; ties in token order.
    pub fn most_similar(&self, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let sims = self.similarities(word)?;
        let me = self.vocab.index_of(word).expect("checked above");
        let mut order: Vec<usize> = (0..sims.len()).filter(|&i| i != me).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| (self.vocab.tokens()[i].clone(), sims[i]))
            .collect())
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        let dim = self.dim();
        let rows = |m: &[f64]| m.chunks(dim).map(<[f64]>::to_vec).collect();
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            dim,
            config: self.config.clone(),
            vocab: self.vocab.tokens().to_vec(),
            counts: self.vocab.counts().to_vec(),
            input: rows(&self.input),
            output: rows(&self.output),
        };
        serde_json::to_string(&file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
        }
        if file.dim != file.config.dim || file.dim == 0 {
            return Err(Error::Dimension { expected: file.config.dim, got: file.dim });
        }
        let v = file.vocab.len();
        if file.counts.len() != v || file.input.len() != v || file.output.len() != v {
            return Err(Error::ModelFormat("table sizes disagree with vocabulary".into()));
        }
        let flatten = |m: Vec<Vec<f64>>| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(v * file.dim);
            for row in m {
                if row.len() != file.dim {
                    return Err(Error::Dimension { expected: file.dim, got: row.len() });
                }
                out.extend(row);
            }
            Ok(out)
        };
        let input = flatten(file.input)?;
        let output = flatten(file.output)?;
        Ok(EmbeddingModel {
            config: file.config,
            vocab: Vocabulary::from_parts(file.vocab, file.counts)?,
            input,
            output,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = self.to_json()?;
        write_file(path, |w| w.write_all(json.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    /// Input vectors in the "V dim" / "token x1 .. xd" text format.
    pub fn write_text<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vocab.len(), self.dim())?;
        for (i, t) in self.vocab.tokens().iter().enumerate() {
            write!(w, "{t}")?;
            for x in self.row(i) {
                write!(w, " {}", fmt_f64(*x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Read the text format. The file carries no counts or output vectors:
    /// counts are zero and output vectors zero.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = numbered_lines(reader);
        let err = |line: usize, m: &str| Error::parse("word vectors", line, m);
        let (line, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let header = header.map_err(|e| Error::parse("word vectors", line, e))?;
        let mut it = header.split_whitespace();
        let v: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(line, "bad vocabulary size"))?;
        let dim: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(line, "bad dimension"))?;
        if dim == 0 || it.next().is_some() {
            return Err(err(line, "header must be `V dim` with dim >= 1"));
        }
        let mut rows = BTreeMap::new();
        for (line, text) in lines {
            let text = text.map_err(|e| Error::parse("word vectors", line, e))?;
            let mut parts = text.split_whitespace();
            let token = parts.next().ok_or_else(|| err(line, "empty row"))?.to_string();
            let row: Vec<f64> = parts
                .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| err(line, "bad number"))?;
            if row.len() != dim {
                return Err(Error::Dimension { expected: dim, got: row.len() });
            }
            if rows.insert(token.clone(), row).is_some() {
                return Err(err(line, &format!("duplicate token `{token}`")));
            }
        }
        if rows.len() != v {
            return Err(Error::ModelFormat(format!("header says {v} rows, found {}", rows.len())));
        }
        let vocab = Vocabulary::from_counts(rows.keys().map(|t| (t.clone(), 0)).collect());
        let input: Vec<f64> = rows.into_values().flatten().collect();
        Ok(EmbeddingModel {
            config: EmbeddingConfig { dim, min_count: 0, ..Default::default() },
            output: vec![0.0; input.len()],
            vocab,
            input,
        })
    }
}
