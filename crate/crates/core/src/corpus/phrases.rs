//! Collocation mining: adjacent pairs scored by NPMI, with a second pass
//! over pair-merged documents to find trigrams.

use std::collections::{BTreeMap, HashMap};

use super::TokenDoc;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub const PHRASE_EPSILON: f64 = 1e-12;

/// Scored multi-word expressions keyed by their component tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseTable {
    entries: BTreeMap<Vec<String>, f64>,
}

impl PhraseTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<S: Into<String>>(&mut self, components: impl IntoIterator<Item = S>, score: f64) {
        let components: Vec<String> = components.into_iter().map(Into::into).collect();
        assert!(components.len() >= 2, "a phrase needs at least two components");
        self.entries.insert(components, score);
    }

    pub fn score(&self, components: &[String]) -> Option<f64> {
        self.entries.get(components).copied()
    }

    pub fn contains(&self, components: &[&str]) -> bool {
        let owned: Vec<String> = components.iter().map(|s| s.to_string()).collect();
        self.entries.contains_key(&owned)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], f64)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn merge(&mut self, other: &PhraseTable) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), *v);
        }
    }

    /// `phrase,score` lines; components joined by a space.
    pub fn write_csv<W: std::io::Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "phrase,score")?;
        for (k, v) in &self.entries {
            writeln!(w, "{},{}", k.join(" "), fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut table = PhraseTable::new();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "phrase,score" => {}
            _ => return Err(Error::parse("phrase table", 1, "expected header `phrase,score`")),
        }
        for (i, line) in lines {
            let err = |m: &str| Error::parse("phrase table", i + 1, m);
            let (phrase, score) = line.rsplit_once(',').ok_or_else(|| err("expected phrase,score"))?;
            let parts: Vec<&str> = phrase.split_whitespace().collect();
            if parts.len() < 2 {
                return Err(err("a phrase needs at least two components"));
            }
            let score: f64 = score.trim().parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| err("bad score"))?;
            table.insert(parts, score);
        }
        Ok(table)
    }

    fn max_len(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }
}

/// Normalized PMI of an adjacent pair from raw counts over `total` tokens.
pub fn pair_npmi(pair_count: u64, count_a: u64, count_b: u64, total: u64) -> f64 {
    let n = total as f64;
    let p_ab = pair_count as f64 / n + PHRASE_EPSILON;
    let (p_a, p_b) = (count_a as f64 / n, count_b as f64 / n);
    if p_ab >= 1.0 {
        return 1.0;
    }
    ((p_ab / (p_a * p_b)).ln() / -p_ab.ln()).clamp(-1.0, 1.0)
}

/// Units are component lists so merged tokens keep their original parts.
type Unit = Vec<String>;

fn score_pairs(
    docs: &[Vec<Unit>],
    min_count: usize,
    threshold: f64,
    keep: impl Fn(&Unit, &Unit) -> bool,
) -> Vec<(Unit, f64)> {
    let mut unigrams: HashMap<&Unit, u64> = HashMap::new();
    let mut pairs: HashMap<(&Unit, &Unit), u64> = HashMap::new();
    let mut total = 0u64;
    for doc in docs {
        total += doc.len() as u64;
        for unit in doc {
            *unigrams.entry(unit).or_default() += 1;
        }
        for w in doc.windows(2) {
            *pairs.entry((&w[0], &w[1])).or_default() += 1;
        }
    }
    let mut found = Vec::new();
    for ((a, b), &c_ab) in &pairs {
        if c_ab < min_count as u64 || !keep(a, b) {
            continue;
        }
        let score = pair_npmi(c_ab, unigrams[a], unigrams[b], total);
        if score >= threshold {
            found.push(([a.as_slice(), b.as_slice()].concat(), score));
        }
    }
    // Hash order is per-process; (x y)+z and x+(y z) can also land on the same
    // key, so fix the order and let the higher score win.
    found.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    found
}

/// Mine bigrams and trigrams whose NPMI reaches `threshold` and whose pair
/// count reaches `min_count`.
pub fn mine_phrases(docs: &[TokenDoc], min_count: usize, threshold: f64) -> PhraseTable {
    let min_count = min_count.max(1);
    let units: Vec<Vec<Unit>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| vec![t.clone()]).collect())
        .collect();
    let mut table = PhraseTable::new();
    for (k, score) in score_pairs(&units, min_count, threshold, |_, _| true) {
        table.entries.insert(k, score);
    }
    if table.is_empty() {
        return table;
    }
    let merged: Vec<Vec<Unit>> = units.iter().map(|doc| merge_units(doc, &table)).collect();
    let trigrams = score_pairs(&merged, min_count, threshold, |a, b| a.len() + b.len() == 3);
    for (k, score) in trigrams {
        table.entries.insert(k, score);
    }
    table
}

fn merge_units(doc: &[Unit], table: &PhraseTable) -> Vec<Unit> {
    let max_len = table.max_len();
    let mut out = Vec::with_capacity(doc.len());
    let mut i = 0;
    'outer: while i < doc.len() {
        for len in (2..=max_len.min(doc.len() - i)).rev() {
            let key: Vec<String> = doc[i..i + len].iter().flatten().cloned().collect();
            if table.entries.contains_key(&key) {
                out.push(key);
                i += len;
                continue 'outer;
            }
        }
        out.push(doc[i].clone());
        i += 1;
    }
    out
}

/// Greedy left-to-right longest-match merge; merged tokens are joined by "-".
pub fn apply_phrases(doc: &TokenDoc, table: &PhraseTable) -> TokenDoc {
    let max_len = table.max_len();
    let tokens = &doc.tokens;
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    'outer: while i < tokens.len() {
        for len in (2..=max_len.min(tokens.len() - i)).rev() {
            if table.entries.contains_key(&tokens[i..i + len]) {
                out.push(tokens[i..i + len].join("-"));
                i += len;
                continue 'outer;
            }
        }
        out.push(tokens[i].clone());
        i += 1;
    }
    TokenDoc {
        note_id: doc.note_id.clone(),
        tokens: out,
    }
}
