//! Rule-based English lemmatizer: an exception lexicon consulted first,
//! then ordered suffix rules applied until no rule fires.

use std::collections::{HashMap, HashSet};

const DEFAULT_EXCEPTIONS: &str = include_str!("../../data/lemma_exceptions.txt");
const DEFAULT_E_FINAL: &str = include_str!("../../data/lemma_e_final.txt");

#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
    e_final: HashSet<String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::from_lexicons(DEFAULT_EXCEPTIONS, DEFAULT_E_FINAL)
    }
}

fn entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl Lemmatizer {
    /// Build from lexicon texts. `exceptions` holds `form lemma` lines (a
    /// lone word maps to itself); `e_final` lists lemmas ending in "e".
    pub fn from_lexicons(exceptions: &str, e_final: &str) -> Self {
        let exceptions = entries(exceptions)
            .filter_map(|line| {
                let mut parts = line.split_whitespace();
                let form = parts.next()?.to_lowercase();
                let lemma = parts.next().map(str::to_lowercase).unwrap_or_else(|| form.clone());
                Some((form, lemma))
            })
            .collect();
        let e_final = entries(e_final).map(str::to_lowercase).collect();
        Lemmatizer { exceptions, e_final }
    }

    /// Extend the exception lexicon with additional `form lemma` lines.
    pub fn with_extra_exceptions(mut self, text: &str) -> Self {
        let extra = Self::from_lexicons(text, "");
        self.exceptions.extend(extra.exceptions);
        self
    }

    pub fn exception_lemmas(&self) -> impl Iterator<Item = &str> {
        self.exceptions.values().map(String::as_str)
    }

    pub fn lemmatize(&self, token: &str) -> String {
        // Phrase tokens and alphanumerics such as "401k" are left intact.
        if !token.chars().all(|c| c.is_alphabetic()) {
            return token.to_string();
        }
        let mut current = token.to_string();
        loop {
            if let Some(lemma) = self.exceptions.get(&current) {
                return lemma.clone();
            }
            match self.step(&current) {
                Some(next) => current = next,
                None => return current,
            }
        }
    }

    /// One suffix rule application. Every rule strictly shortens the word.
    fn step(&self, w: &str) -> Option<String> {
        let n = w.chars().count();
        if n <= 3 || !w.is_ascii() {
            return None;
        }
        if let Some(stem) = w.strip_suffix("ies") {
            if n >= 5 {
                return Some(format!("{stem}y"));
            }
        }
        if let Some(stem) = w.strip_suffix("sses") {
            return Some(format!("{stem}ss"));
        }
        if let Some(stem) = w.strip_suffix("es") {
            if ["x", "ch", "sh"].iter().any(|s| stem.ends_with(s)) {
                return Some(stem.to_string());
            }
            return Some(format!("{stem}e"));
        }
        if let Some(stem) = w.strip_suffix('s') {
            if ["ss", "us", "is"].iter().any(|s| w.ends_with(s)) {
                return None;
            }
            return Some(stem.to_string());
        }
        if let Some(stem) = w.strip_suffix("ied") {
            return Some(format!("{stem}y"));
        }
        if w.ends_with("eed") {
            return (n >= 6).then(|| w[..w.len() - 1].to_string());
        }
        if let Some(stem) = w.strip_suffix("ed") {
            return self.restore(stem);
        }
        if let Some(stem) = w.strip_suffix("ing") {
            return self.restore(stem);
        }
        None
    }

    fn restore(&self, stem: &str) -> Option<String> {
        if stem.len() < 3 || !stem.chars().any(is_vowel) {
            return None;
        }
        let with_e = format!("{stem}e");
        if self.e_final.contains(&with_e) {
            return Some(with_e);
        }
        let b = stem.as_bytes();
        let (last, prev) = (b[b.len() - 1], b[b.len() - 2]);
        if last == prev && !is_vowel(last as char) && !matches!(last, b'l' | b's' | b'z') {
            return Some(stem[..stem.len() - 1].to_string());
        }
        Some(stem.to_string())
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}
