//! Answer normalization and string similarity.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Default penalty threshold on normalized edit distance.
pub const DEFAULT_TAU: f64 = 0.75;

/// String preprocessing applied to answers before comparison. NFC
/// composition is always applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationPolicy {
    pub casefold: bool,
    pub collapse_whitespace: bool,
    pub strip_edges: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            casefold: true,
            collapse_whitespace: true,
            strip_edges: true,
        }
    }
}

impl NormalizationPolicy {
    /// Identity apart from NFC composition.
    pub fn raw() -> Self {
        Self {
            casefold: false,
            collapse_whitespace: false,
            strip_edges: false,
        }
    }
}

pub fn normalize(text: &str, policy: &NormalizationPolicy) -> String {
    let mut s: String = text.nfc().collect();
    if policy.casefold {
        s = s.to_lowercase().nfc().collect();
    }
    if policy.collapse_whitespace {
        let mut out = String::with_capacity(s.len());
        let mut in_ws = false;
        for ch in s.chars() {
            if ch.is_whitespace() {
                if !in_ws {
                    out.push(' ');
                }
                in_ws = true;
            } else {
                out.push(ch);
                in_ws = false;
            }
        }
        s = out;
    }
    if policy.strip_edges {
        let trimmed = s.trim();
        if trimmed.len() != s.len() {
            s = trimmed.to_string();
        }
    }
    s
}

/// Edit distance over unicode scalar values with unit insert, delete and
/// substitute costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    // Iterate over the longer string so the row is the shorter one.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for &lc in long {
        advance_row(&mut row, lc, short);
    }
    row[short.len()]
}

/// Extends a DP row (distances of a prefix against every prefix of `target`)
/// by one more character.
pub(crate) fn advance_row(row: &mut [usize], ch: char, target: &[char]) {
    let mut diag = row[0];
    row[0] += 1;
    for (j, &tc) in target.iter().enumerate() {
        let up = row[j + 1];
        let sub = diag + usize::from(tc != ch);
        row[j + 1] = sub.min(up + 1).min(row[j] + 1);
        diag = up;
    }
}

/// Edit distance divided by the longer length; `0` for two empty strings.
pub fn normalized_levenshtein(ans: &str, gt: &str) -> f64 {
    let a: Vec<char> = ans.chars().collect();
    let b: Vec<char> = gt.chars().collect();
    normalized_from_parts(levenshtein_chars(&a, &b), a.len().max(b.len()))
}

pub(crate) fn normalized_from_parts(distance: usize, max_len: usize) -> f64 {
    if max_len == 0 {
        0.0
    } else {
        distance as f64 / max_len as f64
    }
}

/// Thresholded similarity `1 - NL` when `NL < tau`, else `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub nl: f64,
    pub tau: f64,
}

impl SimilarityScore {
    pub fn from_nl(nl: f64, tau: f64) -> Self {
        let value = if nl < tau { 1.0 - nl } else { 0.0 };
        Self { value, nl, tau }
    }
}

pub fn check_ratio(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be in (0, 1], got {value}")))
    }
}

/// Similarity of two already-normalized strings.
pub fn similarity_score(ans: &str, gt: &str, tau: f64) -> Result<SimilarityScore> {
    check_ratio("tau", tau)?;
    Ok(SimilarityScore::from_nl(normalized_levenshtein(ans, gt), tau))
}

/// Consensus accuracy against several human answers: `min(#matches / 3, 1)`
/// with matches counted after normalization.
pub fn vqa_accuracy(
    ans: &str,
    human_answers: Option<&[String]>,
    policy: &NormalizationPolicy,
) -> Result<f64> {
    let humans = match human_answers {
        Some(h) if !h.is_empty() => h,
        _ => {
            return Err(Error::UnsupportedMetric(
                "vqa accuracy needs human answers".into(),
            ))
        }
    };
    let ans = normalize(ans, policy);
    let matches = humans.iter().filter(|h| normalize(h, policy) == ans).count();
    Ok((matches as f64 / 3.0).min(1.0))
}
