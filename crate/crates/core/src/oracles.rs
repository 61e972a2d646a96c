//! Non-learned baselines: vocabulary and OCR upper bounds, the random OCR
//! token baseline, and evidence attachment for answer-only predictions.
//!
//! Every oracle emits a standard CLC submission bundle and scores it through
//! [`crate::scoring`], so its reports are exactly what re-submitting the
//! bundle would produce.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::model::{
    Dataset, LanguageTag, OcrIndex, OcrToken, Prediction, QARecord, QuadBox, SubmissionBundle,
    Task, Track,
};
use crate::scoring::{score_allow_empty, score_questions, ScoringParams, TaskReport};
use crate::text::{
    advance_row, normalize, normalized_from_parts, normalized_levenshtein, NormalizationPolicy,
    SimilarityScore,
};

/// Default limit on tokens combined into one OCR answer.
pub const DEFAULT_MAX_TOKENS: usize = 4;
/// Images with more tokens keep only the ones closest to the ground truth.
pub const MAX_SEARCH_TOKENS: usize = 25;

/// Description of the per-question random stream, recorded in oracle reports.
pub const RNG_ALGORITHM: &str = "chacha8; key = sha256(seed as u64 little-endian || question_id utf-8); \
index = widening 64-bit multiply with rejection";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabularyKind {
    /// Answers seen at least twice in training.
    Sv,
    /// Every distinct training answer.
    Lv,
}

impl std::str::FromStr for VocabularyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sv" => Ok(VocabularyKind::Sv),
            "lv" => Ok(VocabularyKind::Lv),
            other => Err(Error::InvalidParameter(format!("unknown vocabulary kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub kind: VocabularyKind,
    pub language: LanguageTag,
    pub entries: BTreeSet<String>,
}

impl Vocabulary {
    pub fn contains(&self, normalized: &str) -> bool {
        self.entries.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One vocabulary per language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularySet {
    pub kind: VocabularyKind,
    pub by_language: BTreeMap<LanguageTag, Vocabulary>,
    pub warnings: Vec<String>,
}

impl VocabularySet {
    pub fn get(&self, language: LanguageTag) -> &Vocabulary {
        &self.by_language[&language]
    }
}

pub fn build_vocabulary(
    train_answers: &[(String, LanguageTag)],
    kind: VocabularyKind,
    policy: &NormalizationPolicy,
) -> VocabularySet {
    let mut counts: BTreeMap<LanguageTag, HashMap<String, usize>> = BTreeMap::new();
    for (answer, lang) in train_answers {
        let a = normalize(answer, policy);
        if !a.is_empty() {
            *counts.entry(*lang).or_default().entry(a).or_default() += 1;
        }
    }
    let min_count = match kind {
        VocabularyKind::Sv => 2,
        VocabularyKind::Lv => 1,
    };
    let mut warnings = Vec::new();
    if train_answers.is_empty() {
        warnings.push("no training answers; vocabularies are empty".to_string());
    }
    let by_language = LanguageTag::ALL
        .into_iter()
        .map(|lang| {
            let entries = counts
                .get(&lang)
                .map(|c| {
                    c.iter()
                        .filter(|(_, &n)| n >= min_count)
                        .map(|(a, _)| a.clone())
                        .collect()
                })
                .unwrap_or_default();
            (lang, Vocabulary { kind, language: lang, entries })
        })
        .collect();
    VocabularySet {
        kind,
        by_language,
        warnings,
    }
}

/// Training answers of a dataset, in the form [`build_vocabulary`] expects.
pub fn training_answers(train: &Dataset) -> Vec<(String, LanguageTag)> {
    train
        .records()
        .iter()
        .map(|r| (r.answer.clone(), r.language))
        .collect()
}

/// What an oracle chose for one question and how it scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleChoice {
    pub question_id: String,
    pub answer: Option<String>,
    pub evidence: Option<QuadBox>,
    pub s_l: f64,
    pub s_e: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub name: String,
    pub choices: Vec<OracleChoice>,
    pub bundle: SubmissionBundle,
    pub tc: TaskReport,
    pub lc: TaskReport,
    pub clc: TaskReport,
    pub header: BTreeMap<String, String>,
}

impl OracleResult {
    pub fn report(&self, task: Task) -> &TaskReport {
        match task {
            Task::Tc => &self.tc,
            Task::Lc => &self.lc,
            Task::Clc => &self.clc,
        }
    }
}

/// Packs per-question outputs into a CLC bundle and scores it under every
/// task.
fn finish(
    name: &str,
    dataset: &Dataset,
    predictions: Vec<Prediction>,
    params: &ScoringParams,
    header: BTreeMap<String, String>,
) -> Result<OracleResult> {
    let bundle = SubmissionBundle::split_from_bilingual(name, dataset, predictions);
    let bi = bundle.track(Track::Bi).unwrap_or(&[]);
    let scores = score_questions(dataset, bi, Track::Bi, params)?;
    let by_id: HashMap<&str, &Prediction> = bi.iter().map(|p| (p.question_id.as_str(), p)).collect();
    let choices = scores
        .iter()
        .map(|s| {
            let p = by_id.get(s.question_id.as_str());
            OracleChoice {
                question_id: s.question_id.clone(),
                answer: p.and_then(|p| p.answer.clone()),
                evidence: p.and_then(|p| p.evidence.as_ref()).and_then(|e| e.quad().copied()),
                s_l: s.s_l,
                s_e: s.s_e,
                iou: s.verdict.as_ref().map_or(0.0, |v| v.iou),
            }
        })
        .collect();
    let mut reports = Vec::with_capacity(3);
    for task in [Task::Tc, Task::Lc, Task::Clc] {
        let mut r = score_allow_empty(task, dataset, &bundle, params)?;
        r.header = header.clone();
        reports.push(r);
    }
    let clc = reports.pop().expect("three reports");
    let lc = reports.pop().expect("three reports");
    let tc = reports.pop().expect("three reports");
    Ok(OracleResult {
        name: name.to_string(),
        choices,
        bundle,
        tc,
        lc,
        clc,
        header,
    })
}

/// Upper bound of a classifier restricted to `vocab`: every ground truth in
/// the vocabulary is answered exactly with perfect evidence.
pub fn vocab_upper_bound(
    vocab: &VocabularySet,
    dataset: &Dataset,
    params: &ScoringParams,
) -> Result<OracleResult> {
    params.validate()?;
    let predictions = dataset
        .records()
        .iter()
        .filter(|r| vocab.get(r.language).contains(&normalize(&r.answer, &params.policy)))
        .map(|r| {
            Prediction::new(&r.question_id)
                .with_answer(&r.answer)
                .with_evidence(r.evidence)
        })
        .collect();
    let name = match vocab.kind {
        VocabularyKind::Sv => "SV UB",
        VocabularyKind::Lv => "LV UB",
    };
    let mut header = BTreeMap::new();
    for (lang, v) in &vocab.by_language {
        header.insert(format!("vocabulary.{lang}"), v.len().to_string());
    }
    finish(name, dataset, predictions, params, header)
}

struct SearchToken<'a> {
    chars: Vec<char>,
    token: &'a OcrToken,
}

struct Best {
    seq: Vec<usize>,
    s_l: f64,
    iou: f64,
}

struct Search<'a> {
    gt: Vec<char>,
    gt_box: &'a QuadBox,
    tokens: Vec<SearchToken<'a>>,
    separator: Option<char>,
    tau: f64,
    max_tokens: usize,
    best: Option<Best>,
}

impl Search<'_> {
    fn evidence(&self, seq: &[usize]) -> Option<QuadBox> {
        match seq {
            [single] => Some(self.tokens[*single].token.bbox),
            _ => QuadBox::enclosing(seq.iter().map(|&i| &self.tokens[i].token.bbox)),
        }
    }

    fn consider(&mut self, seq: &[usize], s_l: f64) {
        if let Some(b) = &self.best {
            if s_l < b.s_l {
                return;
            }
        }
        let iou = self.evidence(seq).map_or(0.0, |e| iou(self.gt_box, &e));
        let better = match &self.best {
            None => true,
            Some(b) => s_l > b.s_l || iou > b.iou,
        };
        if better {
            self.best = Some(Best {
                seq: seq.to_vec(),
                s_l,
                iou,
            });
        }
    }

    /// Depth-first over ordered sequences of distinct tokens, carrying the
    /// edit-distance row of the joined prefix against the ground truth.
    fn extend(&mut self, seq: &mut Vec<usize>, used: &mut [bool], row: &[usize], len: usize) {
        let g = self.gt.len();
        for t in 0..self.tokens.len() {
            if used[t] {
                continue;
            }
            let mut next = row.to_vec();
            let mut next_len = len;
            if !seq.is_empty() {
                if let Some(sep) = self.separator {
                    advance_row(&mut next, sep, &self.gt);
                    next_len += 1;
                }
            }
            for &ch in &self.tokens[t].chars {
                advance_row(&mut next, ch, &self.gt);
            }
            next_len += self.tokens[t].chars.len();
            let nl = normalized_from_parts(next[g], next_len.max(g));
            let s_l = SimilarityScore::from_nl(nl, self.tau).value;
            seq.push(t);
            self.consider(seq, s_l);
            if seq.len() < self.max_tokens && !self.dominated(&next) {
                used[t] = true;
                self.extend(seq, used, &next, next_len);
                used[t] = false;
            }
            seq.pop();
        }
    }

    /// Whether no extension of a prefix with this row can reach the current
    /// best score. Any extension has distance at least `m = min(row)` and
    /// so NL at least `m / (|gt| + m)`.
    fn dominated(&self, row: &[usize]) -> bool {
        let Some(best) = &self.best else { return false };
        let m = row.iter().copied().min().unwrap_or(0);
        let nl_floor = m as f64 / (self.gt.len() + m) as f64;
        let ceiling = SimilarityScore::from_nl(nl_floor, self.tau).value;
        ceiling + 1e-12 < best.s_l
    }
}

/// Best answer assembled from up to `max_tokens` OCR tokens of the question's
/// image: maximizes answer similarity, then evidence IoU.
fn ocr_best(
    record: &QARecord,
    tokens: &[OcrToken],
    params: &ScoringParams,
    max_tokens: usize,
) -> Option<Prediction> {
    let gt = normalize(&record.answer, &params.policy);
    let mut cands: Vec<(SearchToken, f64)> = tokens
        .iter()
        .filter_map(|t| {
            let text = normalize(&t.text, &params.policy);
            (!text.is_empty()).then(|| {
                let nl = normalized_levenshtein(&text, &gt);
                (SearchToken { chars: text.chars().collect(), token: t }, nl)
            })
        })
        .collect();
    if cands.len() > MAX_SEARCH_TOKENS {
        cands.sort_by(|a, b| a.1.total_cmp(&b.1));
        cands.truncate(MAX_SEARCH_TOKENS);
    }
    let mut search = Search {
        gt: gt.chars().collect(),
        gt_box: &record.evidence,
        tokens: cands.into_iter().map(|(t, _)| t).collect(),
        separator: match record.language {
            LanguageTag::English => Some(' '),
            LanguageTag::Chinese => None,
        },
        tau: params.tau,
        max_tokens,
        best: None,
    };
    let mut used = vec![false; search.tokens.len()];
    let row: Vec<usize> = (0..=search.gt.len()).collect();
    search.extend(&mut Vec::new(), &mut used, &row, 0);
    let best = search.best.take()?;
    let sep = search.separator.map(String::from).unwrap_or_default();
    let answer = best
        .seq
        .iter()
        .map(|&i| search.tokens[i].chars.iter().collect::<String>())
        .collect::<Vec<_>>()
        .join(&sep);
    let mut pred = Prediction::new(&record.question_id).with_answer(answer);
    if let Some(e) = search.evidence(&best.seq) {
        pred = pred.with_evidence(e);
    }
    Some(pred)
}

/// Upper bound of answering from OCR output with perfect token selection.
pub fn ocr_upper_bound(
    ocr: &OcrIndex,
    dataset: &Dataset,
    params: &ScoringParams,
    max_tokens: usize,
) -> Result<OracleResult> {
    params.validate()?;
    if max_tokens == 0 {
        return Err(Error::InvalidParameter("max_tokens must be at least 1".into()));
    }
    let predictions: Vec<Prediction> = dataset
        .records()
        .par_iter()
        .filter_map(|r| ocr_best(r, ocr.tokens(&r.image_id), params, max_tokens))
        .collect();
    let header = BTreeMap::from([
        ("max_tokens".to_string(), max_tokens.to_string()),
        ("max_search_tokens".to_string(), MAX_SEARCH_TOKENS.to_string()),
    ]);
    finish("OCR UB", dataset, predictions, params, header)
}

/// Deterministic per-question random stream.
pub fn question_rng(seed: u64, question_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(question_id.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Uniform index in `0..n` without modulo bias.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    assert!(n > 0, "cannot pick from an empty range");
    let n = n as u64;
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = u128::from(rng.next_u64()) * u128::from(n);
        if (m as u64) >= threshold {
            return (m >> 64) as usize;
        }
    }
}

fn rng_header(seed: u64) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("rng".to_string(), RNG_ALGORITHM.to_string()),
        ("seed".to_string(), seed.to_string()),
    ])
}

/// One uniformly random OCR token per question, used as both answer and
/// evidence.
pub fn random_baseline(
    ocr: &OcrIndex,
    dataset: &Dataset,
    seed: u64,
    params: &ScoringParams,
) -> Result<OracleResult> {
    params.validate()?;
    let predictions = dataset
        .records()
        .iter()
        .filter_map(|r| {
            let tokens = ocr.tokens(&r.image_id);
            if tokens.is_empty() {
                return None;
            }
            let t = &tokens[uniform_index(&mut question_rng(seed, &r.question_id), tokens.len())];
            Some(
                Prediction::new(&r.question_id)
                    .with_answer(&t.text)
                    .with_evidence(t.bbox),
            )
        })
        .collect();
    finish("Random", dataset, predictions, params, rng_header(seed))
}

/// Evidence for an answer-only prediction: a random one of the tokens equal
/// to the answer, else the token with the smallest normalized edit distance
/// (earliest on ties). `None` when the image has no tokens.
pub fn evidence_for_answer(
    answer: &str,
    tokens: &[OcrToken],
    rng: &mut impl RngCore,
    policy: &NormalizationPolicy,
) -> Option<QuadBox> {
    if tokens.is_empty() {
        return None;
    }
    let ans = normalize(answer, policy);
    let texts: Vec<String> = tokens.iter().map(|t| normalize(&t.text, policy)).collect();
    let exact: Vec<usize> = (0..tokens.len()).filter(|&i| texts[i] == ans).collect();
    let pick = if exact.is_empty() {
        let mut best = 0;
        let mut best_nl = f64::INFINITY;
        for (i, t) in texts.iter().enumerate() {
            let nl = normalized_levenshtein(&ans, t);
            if nl < best_nl {
                best = i;
                best_nl = nl;
            }
        }
        best
    } else {
        exact[uniform_index(rng, exact.len())]
    };
    Some(tokens[pick].bbox)
}

/// Fills in evidence for predictions that have an answer but no box.
pub fn attach_evidence(
    predictions: &[Prediction],
    dataset: &Dataset,
    ocr: &OcrIndex,
    seed: u64,
    policy: &NormalizationPolicy,
) -> Vec<Prediction> {
    predictions
        .iter()
        .map(|p| {
            let mut p = p.clone();
            if p.evidence.is_none() {
                if let (Some(answer), Some(record)) = (&p.answer, dataset.get(&p.question_id)) {
                    let mut rng = question_rng(seed, &p.question_id);
                    if let Some(b) = evidence_for_answer(answer, ocr.tokens(&record.image_id), &mut rng, policy) {
                        p.evidence = Some(b.into());
                    }
                }
            }
            p
        })
        .collect()
}

/// [`attach_evidence`] applied to every track of a bundle.
pub fn attach_evidence_bundle(
    bundle: &SubmissionBundle,
    dataset: &Dataset,
    ocr: &OcrIndex,
    seed: u64,
    policy: &NormalizationPolicy,
) -> SubmissionBundle {
    let mut out = bundle.clone();
    for preds in out.tracks.values_mut() {
        *preds = attach_evidence(preds, dataset, ocr, seed, policy);
    }
    out
}
