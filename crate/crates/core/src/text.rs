//! Small text utilities shared by the mock backends and the corpus code.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

/// Lowercased alphanumeric tokens in order of appearance.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().collect()
}

/// Jaccard overlap of the two token sets; 0 when both are empty.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a = token_set(a);
    let b = token_set(b);
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Fraction of `needle`'s distinct tokens that occur in `haystack`.
pub fn coverage(needle: &str, haystack: &str) -> f64 {
    let n = token_set(needle);
    if n.is_empty() {
        return 0.0;
    }
    let h = token_set(haystack);
    n.intersection(&h).count() as f64 / n.len() as f64
}

/// Byte length of the first sentence in `text`: everything up to and
/// including the first `.`, `?`, `!`, or up to (excluding) a newline.
pub fn first_sentence_len(text: &str) -> usize {
    for (i, c) in text.char_indices() {
        match c {
            '.' | '?' | '!' => return i + c.len_utf8(),
            '\n' => return i,
            _ => {}
        }
    }
    text.len()
}

/// First sentence after skipping leading whitespace, trimmed.
pub fn first_sentence(text: &str) -> &str {
    let t = text.trim_start();
    t[..first_sentence_len(t)].trim()
}

/// Splits text into sentences on terminators and newlines.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.trim().is_empty() {
        let t = rest.trim_start();
        let n = first_sentence_len(t).max(1);
        let (s, r) = t.split_at(n.min(t.len()));
        let s = s.trim();
        if !s.is_empty() {
            out.push(s);
        }
        rest = r;
    }
    out
}

/// First `n` whitespace-separated words.
pub fn leading_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// Stable 64-bit hash of a sequence of string parts, independent of process
/// and platform.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Truncates to at most `max` bytes on a char boundary, appending an
/// ellipsis when anything was cut.
pub fn excerpt(text: &str, max: usize) -> String {
    if text.len() <= max {
        return text.to_string();
    }
    let mut end = max;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}…", &text[..end])
}
