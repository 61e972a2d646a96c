//! Word tokenization for answer-length classes and corpus statistics.
//!
//! English text splits on whitespace. Chinese has no inter-word spaces, so
//! the default treats each whitespace-free run as one word; a lexicon-based
//! forward maximal-matching segmenter or per-character splitting can be
//! plugged in instead.

use std::collections::HashSet;

use crate::model::LanguageTag;

#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    pub chinese: ChineseSegmentation,
}

#[derive(Debug, Clone, Default)]
pub enum ChineseSegmentation {
    /// Each whitespace-delimited run is one token.
    #[default]
    Runs,
    /// Every CJK character is its own token; other runs split on whitespace.
    Characters,
    Lexicon(LexiconSegmenter),
}

impl Tokenizer {
    pub fn with_lexicon(words: impl IntoIterator<Item = String>) -> Self {
        Self {
            chinese: ChineseSegmentation::Lexicon(LexiconSegmenter::new(words)),
        }
    }

    pub fn tokenize(&self, text: &str, language: LanguageTag) -> Vec<String> {
        match language {
            LanguageTag::English => whitespace(text),
            LanguageTag::Chinese => match &self.chinese {
                ChineseSegmentation::Runs => whitespace(text),
                ChineseSegmentation::Characters => text
                    .split_whitespace()
                    .flat_map(split_cjk_chars)
                    .collect(),
                ChineseSegmentation::Lexicon(seg) => text
                    .split_whitespace()
                    .flat_map(|run| seg.segment(run))
                    .collect(),
            },
        }
    }
}

fn whitespace(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn is_cjk(ch: char) -> bool {
    matches!(ch as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

fn split_cjk_chars(run: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut pending = String::new();
    for ch in run.chars() {
        if is_cjk(ch) {
            if !pending.is_empty() {
                out.push(std::mem::take(&mut pending));
            }
            out.push(ch.to_string());
        } else {
            pending.push(ch);
        }
    }
    if !pending.is_empty() {
        out.push(pending);
    }
    out
}

/// Forward maximal matching against a word list. Characters not covered by
/// any lexicon word become single-character tokens.
#[derive(Debug, Clone, Default)]
pub struct LexiconSegmenter {
    words: HashSet<String>,
    max_chars: usize,
}

impl LexiconSegmenter {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        let words: HashSet<String> = words.into_iter().filter(|w| !w.is_empty()).collect();
        let max_chars = words.iter().map(|w| w.chars().count()).max().unwrap_or(1);
        Self { words, max_chars }
    }

    pub fn segment(&self, run: &str) -> Vec<String> {
        let chars: Vec<char> = run.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let longest = (2..=self.max_chars.min(chars.len() - i))
                .rev()
                .find(|&len| {
                    let cand: String = chars[i..i + len].iter().collect();
                    self.words.contains(&cand)
                })
                .unwrap_or(1);
            out.push(chars[i..i + longest].iter().collect());
            i += longest;
        }
        out
    }
}
