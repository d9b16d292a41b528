use std::sync::OnceLock;

use regex::Regex;

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|ftp://|www\.)\S+").unwrap())
}

fn list_marker_pattern() -> &'static Regex {
    static MARKER: OnceLock<Regex> = OnceLock::new();
    MARKER.get_or_init(|| Regex::new(r"(?m)^[ \t]*[-*+][ \t]+").unwrap())
}

/// Strip bullets, control characters, URLs and runs of punctuation, then
/// case-fold and normalize whitespace.
pub fn clean(text: &str) -> String {
    let text = url_pattern().replace_all(text, " ");
    let text = list_marker_pattern().replace_all(&text, " ");

    let mut out = String::with_capacity(text.len());
    let mut prev_punct = false;
    let mut pending_space = false;
    for c in text.chars() {
        let c = match c {
            '\u{2019}' | '\u{2018}' | '\u{02bc}' => '\'',
            _ => c,
        };
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            prev_punct = false;
            out.extend(c.to_lowercase());
        } else if c.is_ascii_punctuation() {
            if prev_punct {
                continue;
            }
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            prev_punct = true;
            out.push(c);
        } else {
            // whitespace, control characters, bullets and other symbols
            pending_space = true;
            prev_punct = false;
        }
    }
    out
}

/// Split cleaned text into tokens. Apostrophes inside words are dropped
/// ("don't" -> "dont"), hyphens inside words are kept, and tokens without
/// any letter (numbers, stray symbols) are discarded.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            continue;
        }
        let inner = !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
            && chars[i - 1].is_alphanumeric();
        match c {
            '\'' | '\u{2019}' if inner => {}
            '-' if inner => current.push('-'),
            _ => flush(&mut current, &mut tokens),
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if current.chars().any(char::is_alphabetic) {
        tokens.push(std::mem::take(current));
    } else {
        current.clear();
    }
}
