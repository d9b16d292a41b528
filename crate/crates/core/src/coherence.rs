//! C_v topic coherence over boolean sliding windows.
//!
//! Windows never cross document boundaries. A document of `n >= window`
//! tokens yields `n - window + 1` windows; a shorter nonempty document
//! yields exactly one window; an empty document yields none. Membership is
//! boolean: a token counts once per window however often it repeats.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use crate::corpus::{TokenDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_file};
use crate::topicmodel::{self, LdaConfig, LdaModel};

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceConfig {
    pub window_size: usize,
    pub top_n: usize,
    pub epsilon: f64,
    /// Exponent applied (sign-preserving) to NPMI context-vector entries.
    pub gamma: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            window_size: 110,
            top_n: 10,
            epsilon: 1e-12,
            gamma: 1.0,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::Config("window_size must be at least 2".into()));
        }
        if self.top_n < 2 {
            return Err(Error::Config("top_n must be at least 2".into()));
        }
        Ok(())
    }
}

/// Window-document frequencies of tokens and token pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowCounts {
    total: u64,
    ids: HashMap<String, u32>,
    counts: Vec<u64>,
    /// Keyed by (smaller id, larger id).
    pairs: HashMap<(u32, u32), u64>,
}

/// Window starts covered by a token, as sorted disjoint half-open ranges.
fn coverage(positions: &[usize], window: usize, n_windows: usize) -> Vec<(usize, usize)> {
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for &p in positions {
        let lo = p.saturating_sub(window - 1);
        let hi = p.min(n_windows - 1) + 1;
        match ranges.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => ranges.push((lo, hi)),
        }
    }
    ranges
}

fn overlap(a: &[(usize, usize)], b: &[(usize, usize)]) -> u64 {
    let (mut i, mut j, mut total) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            total += (hi - lo) as u64;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Count windows over every token in the corpus.
pub fn count_windows(corpus: &[TokenDoc], window_size: usize) -> Result<WindowCounts> {
    count_windows_filtered(corpus, window_size, None)
}

/// Count windows, tracking only tokens in `words`. Totals are unaffected
/// by the restriction.
pub fn count_windows_for(corpus: &[TokenDoc], window_size: usize, words: &HashSet<String>) -> Result<WindowCounts> {
    count_windows_filtered(corpus, window_size, Some(words))
}

fn count_windows_filtered(
    corpus: &[TokenDoc],
    window_size: usize,
    filter: Option<&HashSet<String>>,
) -> Result<WindowCounts> {
    if window_size < 2 {
        return Err(Error::Config("window_size must be at least 2".into()));
    }
    let mut wc = WindowCounts::default();
    for doc in corpus {
        let n = doc.tokens.len();
        if n == 0 {
            continue;
        }
        let n_windows = if n < window_size { 1 } else { n - window_size + 1 };
        wc.total += n_windows as u64;

        let mut positions: HashMap<u32, Vec<usize>> = HashMap::new();
        for (p, t) in doc.tokens.iter().enumerate() {
            if filter.is_some_and(|f| !f.contains(t)) {
                continue;
            }
            let id = wc.intern(t);
            positions.entry(id).or_default().push(p);
        }
        let mut covered: Vec<(u32, Vec<(usize, usize)>)> = positions
            .into_iter()
            .map(|(id, ps)| {
                let window = if n < window_size { n } else { window_size };
                (id, coverage(&ps, window, n_windows))
            })
            .collect();
        covered.sort_by_key(|(id, _)| *id);
        for (i, (a, ra)) in covered.iter().enumerate() {
            wc.counts[*a as usize] += ra.iter().map(|(lo, hi)| (hi - lo) as u64).sum::<u64>();
            for (b, rb) in &covered[i + 1..] {
                let both = overlap(ra, rb);
                if both > 0 {
                    *wc.pairs.entry((*a, *b)).or_default() += both;
                }
            }
        }
    }
    Ok(wc)
}

impl WindowCounts {
    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.counts.len() as u32;
        self.ids.insert(token.to_string(), id);
        self.counts.push(0);
        id
    }

    pub fn total_windows(&self) -> u64 {
        self.total
    }

    pub fn count(&self, token: &str) -> u64 {
        self.ids.get(token).map_or(0, |&i| self.counts[i as usize])
    }

    pub fn pair_count(&self, a: &str, b: &str) -> u64 {
        if a == b {
            return self.count(a);
        }
        match (self.ids.get(a), self.ids.get(b)) {
            (Some(&x), Some(&y)) => self.pairs.get(&(x.min(y), x.max(y))).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.ids.keys().map(String::as_str)
    }
}

/// NPMI from window probabilities, smoothed by `epsilon` and clamped to [-1, 1].
pub fn npmi(counts: &WindowCounts, w1: &str, w2: &str, epsilon: f64) -> Result<f64> {
    for w in [w1, w2] {
        if counts.count(w) == 0 {
            return Err(Error::ZeroCount(w.to_string()));
        }
    }
    let n = counts.total_windows() as f64;
    let p1 = counts.count(w1) as f64 / n;
    let p2 = counts.count(w2) as f64 / n;
    let p12 = counts.pair_count(w1, w2) as f64 / n + epsilon;
    if p12 >= 1.0 {
        return Ok(1.0);
    }
    Ok(((p12 / (p1 * p2)).ln() / -p12.ln()).clamp(-1.0, 1.0))
}

fn signed_pow(x: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        x
    } else {
        x.signum() * x.abs().powf(gamma)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// C_v of a word set: one-set segmentation, NPMI context vectors, cosine
/// against the summed vector, arithmetic mean. Words absent from `counts`
/// are dropped; the list is treated as a set.
pub fn c_v(topic_words: &[String], counts: &WindowCounts, config: &CoherenceConfig) -> Result<f64> {
    let words: Vec<&str> = topic_words
        .iter()
        .map(String::as_str)
        .filter(|w| counts.count(w) > 0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if words.len() < 2 {
        return Err(Error::TooFewWords(words.len()));
    }
    let m = words.len();
    let mut vectors = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let x = signed_pow(npmi(counts, words[i], words[j], config.epsilon)?, config.gamma);
            vectors[i][j] = x;
            vectors[j][i] = x;
        }
    }
    let sum: Vec<f64> = (0..m).map(|j| vectors.iter().map(|v| v[j]).sum()).collect();
    Ok(vectors.iter().map(|v| cosine(v, &sum)).sum::<f64>() / m as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub k: usize,
    pub mean_cv: f64,
    pub topic_cv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub curve: Vec<ScanPoint>,
    pub best_k: usize,
}

/// Mean C_v over a fitted model's topics.
pub fn model_coherence(model: &LdaModel, corpus: &[TokenDoc], config: &CoherenceConfig) -> Result<Vec<f64>> {
    let tops: Vec<Vec<String>> = (0..model.k()).map(|t| model.top_words(t, config.top_n)).collect();
    let interest: HashSet<String> = tops.iter().flatten().cloned().collect();
    let counts = count_windows_for(corpus, config.window_size, &interest)?;
    tops.iter().map(|words| c_v(words, &counts, config)).collect()
}

/// Fit one model per `k` and score it; the best k maximizes mean C_v, ties
/// going to the smaller k.
pub fn scan_topics(
    corpus: &[TokenDoc],
    vocab: &Vocabulary,
    k_values: &[usize],
    template: &LdaConfig,
    config: &CoherenceConfig,
) -> Result<ScanResult> {
    config.validate()?;
    if k_values.is_empty() {
        return Err(Error::Config("k_values must be nonempty".into()));
    }
    let mut curve = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let at_k = |e: Error| Error::AtTopicCount { k, source: Box::new(e) };
        let lda = LdaConfig { k, ..template.clone() };
        let model = topicmodel::fit(corpus, vocab, &lda).map_err(at_k)?;
        let topic_cv = model_coherence(&model, corpus, config).map_err(at_k)?;
        let mean_cv = topic_cv.iter().sum::<f64>() / topic_cv.len() as f64;
        curve.push(ScanPoint { k, mean_cv, topic_cv });
    }
    let best_k = curve
        .iter()
        .fold(None::<&ScanPoint>, |best, p| match best {
            Some(b) if b.mean_cv > p.mean_cv || (b.mean_cv == p.mean_cv && b.k < p.k) => Some(b),
            _ => Some(p),
        })
        .map(|p| p.k)
        .expect("nonempty curve");
    Ok(ScanResult { curve, best_k })
}

/// `k,mean_cv,topic_cv` with per-topic values joined by `;`.
pub fn write_curve_csv(path: &Path, curve: &[ScanPoint]) -> Result<()> {
    write_file(path, |w| write_curve(w, curve))
}

pub fn write_curve<W: Write + ?Sized>(w: &mut W, curve: &[ScanPoint]) -> std::io::Result<()> {
    writeln!(w, "k,mean_cv,topic_cv")?;
    for p in curve {
        let per: Vec<String> = p.topic_cv.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(w, "{},{},{}", p.k, fmt_f64(p.mean_cv), per.join(";"))?;
    }
    Ok(())
}

pub fn read_curve(text: &str) -> Result<Vec<ScanPoint>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let err = |m: &str| Error::parse("coherence curve", i + 1, m);
        let mut parts = line.splitn(3, ',');
        let k = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| err("bad k"))?;
        let mean_cv = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| err("bad mean_cv"))?;
        let topic_cv = parts
            .next()
            .ok_or_else(|| err("missing topic_cv"))?
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| err("bad topic_cv")))
            .collect::<Result<_>>()?;
        out.push(ScanPoint { k, mean_cv, topic_cv });
    }
    Ok(out)
}
