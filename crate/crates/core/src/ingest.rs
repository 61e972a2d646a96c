//! Loading and validating dataset, submission and OCR files, and corpus
//! statistics over a loaded dataset.
//!
//! Validation never stops at the first problem: every rule violation is
//! collected with a locator so a whole file can be fixed in one pass. In
//! strict mode any error rejects the file; lenient mode skips the offending
//! records and downgrades their errors to warnings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    is_yes_no, Dataset, LanguageTag, OcrIndex, OcrToken, PredictedBox, Prediction, QARecord,
    QuadBox, SubmissionBundle, Task, Track,
};
use crate::text::{normalize, NormalizationPolicy};
use crate::tokenize::Tokenizer;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    #[default]
    Strict,
    Lenient,
}

/// One rule violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub locator: String,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: [{}] {}", self.locator, self.rule, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageCounts {
    pub images: usize,
    pub questions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub counts: BTreeMap<LanguageTag, LanguageCounts>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub totals: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, locator: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.errors.push(Issue {
            locator: locator.into(),
            rule: rule.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, locator: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.warnings.push(Issue {
            locator: locator.into(),
            rule: rule.into(),
            message: message.into(),
        });
    }

    /// Strict: any error rejects. Lenient: errors become warnings.
    fn finish(mut self, mode: ValidationMode) -> Result<Self> {
        match mode {
            ValidationMode::Strict if !self.errors.is_empty() => Err(Error::Invalid(Box::new(self))),
            ValidationMode::Strict => Ok(self),
            ValidationMode::Lenient => {
                let errs = std::mem::take(&mut self.errors);
                self.warnings.extend(errs);
                Ok(self)
            }
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error   {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning {w}")?;
        }
        for (lang, c) in &self.counts {
            writeln!(f, "{lang}: {} questions, {} images", c.questions, c.images)?;
        }
        for (k, v) in &self.totals {
            writeln!(f, "{k}: {v}")?;
        }
        write!(f, "{} errors, {} warnings", self.errors.len(), self.warnings.len())
    }
}

fn read(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(format!("{}: not UTF-8: {e}", path.display())))
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::Parse(format!("{what}: {e} (line {}, column {})", e.line(), e.column()))
    })
}

/// Converts raw `[[x, y], ...]` evidence to a validated quad.
fn quad_from_raw(raw: &[Vec<f64>]) -> std::result::Result<QuadBox, (&'static str, String)> {
    if raw.len() != 4 {
        return Err((
            "quad-vertex-count",
            format!("quad must have 4 vertices, got {}", raw.len()),
        ));
    }
    let mut pairs = [[0.0; 2]; 4];
    for (i, v) in raw.iter().enumerate() {
        if v.len() != 2 {
            return Err(("quad-vertex-shape", format!("vertex {i} must be [x, y]")));
        }
        pairs[i] = [v[0], v[1]];
    }
    QuadBox::from_pairs(&pairs).map_err(|e| ("quad-invalid", e.to_string()))
}

fn raw_pairs(raw: &[Vec<f64>]) -> Vec<[f64; 2]> {
    raw.iter()
        .map(|v| [v.first().copied().unwrap_or(f64::NAN), v.get(1).copied().unwrap_or(f64::NAN)])
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    #[serde(default)]
    version: Option<String>,
    questions: Vec<RawQuestion>,
}

#[derive(Deserialize)]
struct RawQuestion {
    question_id: String,
    image_id: String,
    language: String,
    question: String,
    answer: String,
    evidence: Vec<Vec<f64>>,
    #[serde(default)]
    human_answers: Option<Vec<String>>,
}

#[derive(Serialize)]
struct DatasetFile<'a> {
    version: &'a str,
    questions: &'a [QARecord],
}

pub fn load_dataset(path: impl AsRef<Path>, mode: ValidationMode) -> Result<(Dataset, ValidationReport)> {
    parse_dataset(&read(path.as_ref())?, mode)
}

pub fn parse_dataset(text: &str, mode: ValidationMode) -> Result<(Dataset, ValidationReport)> {
    let raw: RawDataset = parse_json(text, "dataset")?;
    let mut report = ValidationReport::default();
    if let Some(v) = &raw.version {
        if v != Dataset::VERSION {
            report.warn("version", "version", format!("unexpected version {v:?}, expected {:?}", Dataset::VERSION));
        }
    }
    let policy = NormalizationPolicy::default();
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw.questions.len());
    for (i, q) in raw.questions.into_iter().enumerate() {
        let loc = format!("questions[{i}] ({})", q.question_id);
        let before = report.errors.len();
        if q.question_id.is_empty() {
            report.error(&loc, "empty-id", "question_id is empty");
        } else if !seen.insert(q.question_id.clone()) {
            report.error(&loc, "duplicate-id", format!("duplicate question_id {:?}", q.question_id));
        }
        let language = match q.language.parse::<LanguageTag>() {
            Ok(l) => Some(l),
            Err(_) => {
                report.error(&loc, "unknown-language", format!("unknown language tag {:?}; expected \"en\" or \"zh\"", q.language));
                None
            }
        };
        if normalize(&q.question, &policy).is_empty() {
            report.error(&loc, "empty-question", "question is empty after normalization");
        }
        let answer = normalize(&q.answer, &policy);
        if answer.is_empty() {
            report.error(&loc, "empty-answer", "answer is empty after normalization");
        } else if is_yes_no(&answer) {
            report.error(&loc, "yes-no-answer", "yes/no questions are prohibited by the dataset annotation rules");
        }
        let evidence = match quad_from_raw(&q.evidence) {
            Ok(b) => Some(b),
            Err((rule, msg)) => {
                report.error(&loc, rule, msg);
                None
            }
        };
        if matches!(&q.human_answers, Some(h) if h.is_empty()) {
            report.warn(&loc, "empty-human-answers", "human_answers is present but empty");
        }
        if report.errors.len() == before {
            records.push(QARecord {
                question_id: q.question_id,
                image_id: q.image_id,
                language: language.expect("checked"),
                question: q.question,
                answer: q.answer,
                evidence: evidence.expect("checked"),
                human_answers: q.human_answers,
            });
        }
    }
    report.counts = language_counts(&records);
    let report = report.finish(mode)?;
    let dataset = Dataset::new(records)?;
    Ok((dataset, report))
}

fn language_counts(records: &[QARecord]) -> BTreeMap<LanguageTag, LanguageCounts> {
    let mut images: BTreeMap<LanguageTag, BTreeSet<&str>> = BTreeMap::new();
    let mut counts: BTreeMap<LanguageTag, LanguageCounts> = BTreeMap::new();
    for r in records {
        counts.entry(r.language).or_default().questions += 1;
        images.entry(r.language).or_default().insert(&r.image_id);
    }
    for (lang, set) in images {
        counts.entry(lang).or_default().images = set.len();
    }
    counts
}

/// Canonical JSON form of a dataset; loading it back yields an equal dataset.
pub fn dataset_to_json(dataset: &Dataset) -> String {
    serde_json::to_string_pretty(&DatasetFile {
        version: dataset.version(),
        questions: dataset.records(),
    })
    .expect("dataset serializes")
}

#[derive(Deserialize)]
struct RawSubmission {
    task: String,
    model: String,
    tracks: BTreeMap<String, Vec<RawPrediction>>,
}

#[derive(Deserialize)]
struct RawPrediction {
    question_id: String,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    evidence: Option<Vec<Vec<f64>>>,
}

fn parse_track(name: &str) -> Option<Track> {
    Track::ALL.into_iter().find(|t| t.code() == name)
}

pub fn load_submission(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    task: Task,
    mode: ValidationMode,
) -> Result<(SubmissionBundle, ValidationReport)> {
    parse_submission(&read(path.as_ref())?, Some(dataset), task, mode)
}

/// Validates a submission for `task`. Without a dataset only structural
/// rules are checked.
pub fn parse_submission(
    text: &str,
    dataset: Option<&Dataset>,
    task: Task,
    mode: ValidationMode,
) -> Result<(SubmissionBundle, ValidationReport)> {
    let raw: RawSubmission = parse_json(text, "submission")?;
    let mut report = ValidationReport::default();
    match raw.task.parse::<Task>() {
        Ok(declared) if declared != task => report.warn(
            "task",
            "task-mismatch",
            format!("file declares task {declared}, scoring as {task}"),
        ),
        Ok(_) => {}
        Err(_) => report.error("task", "unknown-task", format!("unknown task {:?}", raw.task)),
    }
    if raw.model.trim().is_empty() {
        report.warn("model", "empty-model-name", "model name is empty");
    }

    let mut present = BTreeMap::new();
    for (name, preds) in raw.tracks {
        match parse_track(&name) {
            Some(t) => {
                present.insert(t, preds);
            }
            None => report.warn(format!("tracks.{name}"), "unknown-track", format!("unknown track {name:?} ignored")),
        }
    }
    let required = task.required_tracks();
    let missing: Vec<&str> = required
        .iter()
        .filter(|t| !present.contains_key(t))
        .map(|t| t.code())
        .collect();
    if !missing.is_empty() {
        let msg = match task {
            Task::Clc => format!(
                "CLC requires three tracks (mono_en, mono_zh, bi); missing {}",
                missing.join(", ")
            ),
            _ => format!("{} requires the bi track", task.code().to_uppercase()),
        };
        report.error("tracks", "missing-track", msg);
    }
    for extra in present.keys().filter(|t| !required.contains(t)) {
        report.warn(
            format!("tracks.{extra}"),
            "extra-track",
            format!("track {extra} is not used by {} and was ignored", task.code().to_uppercase()),
        );
    }

    let mut tracks = BTreeMap::new();
    let mut ignored_evidence = 0usize;
    for track in required.iter().copied() {
        let Some(preds) = present.remove(&track) else {
            if mode == ValidationMode::Lenient {
                tracks.insert(track, Vec::new());
            }
            continue;
        };
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(preds.len());
        for (i, p) in preds.into_iter().enumerate() {
            let loc = format!("tracks.{track}[{i}] ({})", p.question_id);
            let before = report.errors.len();
            if !seen.insert(p.question_id.clone()) {
                report.error(&loc, "duplicate-prediction", format!("duplicate prediction for {:?}", p.question_id));
            }
            if let Some(ds) = dataset {
                match ds.get(&p.question_id) {
                    None => report.error(&loc, "unknown-question", format!("question_id {:?} is not in the ground truth", p.question_id)),
                    Some(r) if !track.covers(r.language) => report.error(
                        &loc,
                        "track-language",
                        format!("track {track} only accepts {} questions", track.language().map_or("any", |l| l.code())),
                    ),
                    Some(_) => {}
                }
            }
            let answer = p.answer.filter(|a| !a.trim().is_empty());
            if task.needs_answer() && answer.is_none() {
                report.error(&loc, "missing-answer", format!("{} predictions require an answer", task.code().to_uppercase()));
            }
            if task.needs_evidence() && p.evidence.is_none() {
                report.error(&loc, "missing-evidence", format!("{} predictions require evidence", task.code().to_uppercase()));
            }
            let evidence = match p.evidence {
                Some(_) if !task.needs_evidence() => {
                    ignored_evidence += 1;
                    None
                }
                Some(raw) => match quad_from_raw(&raw) {
                    Ok(q) => Some(PredictedBox::Quad(q)),
                    Err((_, msg)) => {
                        report.warn(&loc, "degenerate-evidence", format!("{msg}; scored as incorrect evidence"));
                        Some(PredictedBox::Degenerate {
                            pairs: raw_pairs(&raw),
                            reason: msg,
                        })
                    }
                },
                None => None,
            };
            if report.errors.len() == before {
                out.push(Prediction {
                    question_id: p.question_id,
                    answer,
                    evidence,
                });
            }
        }
        tracks.insert(track, out);
    }
    if ignored_evidence > 0 {
        report.warn(
            "tracks",
            "evidence-ignored",
            format!("{ignored_evidence} prediction(s) carry evidence, which {} ignores", task.code().to_uppercase()),
        );
    }

    if let (Some(ds), Some(bi)) = (dataset, tracks.get(&Track::Bi)) {
        if bi.iter().all(|p| ds.get(&p.question_id).is_none()) && present_bi_ok(&report) {
            report.error("tracks.bi", "empty-submission", "submission does not cover any ground-truth question");
        }
        let mut counts: BTreeMap<LanguageTag, LanguageCounts> = BTreeMap::new();
        let mut images: BTreeMap<LanguageTag, BTreeSet<&str>> = BTreeMap::new();
        for r in bi.iter().filter_map(|p| ds.get(&p.question_id)) {
            counts.entry(r.language).or_default().questions += 1;
            images.entry(r.language).or_default().insert(&r.image_id);
        }
        for (lang, set) in images {
            counts.entry(lang).or_default().images = set.len();
        }
        report.counts = counts;
    }
    for (t, preds) in &tracks {
        report.totals.insert(format!("predictions.{t}"), preds.len());
    }

    let report = report.finish(mode)?;
    let bundle = SubmissionBundle {
        task,
        model_name: raw.model,
        tracks,
    };
    Ok((bundle, report))
}

fn present_bi_ok(report: &ValidationReport) -> bool {
    // Unknown-id errors already explain an empty match.
    !report.errors.iter().any(|e| e.rule == "unknown-question")
}

#[derive(Deserialize)]
struct RawOcr {
    images: Vec<RawOcrImage>,
}

#[derive(Deserialize)]
struct RawOcrImage {
    image_id: String,
    tokens: Vec<RawOcrToken>,
}

#[derive(Deserialize)]
struct RawOcrToken {
    text: String,
    #[serde(rename = "box")]
    bbox: Vec<Vec<f64>>,
    #[serde(default = "full_confidence")]
    confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

#[derive(Serialize)]
struct OcrFile<'a> {
    images: Vec<OcrImageOut<'a>>,
}

#[derive(Serialize)]
struct OcrImageOut<'a> {
    image_id: &'a str,
    tokens: &'a [OcrToken],
}

pub fn load_ocr(path: impl AsRef<Path>) -> Result<(OcrIndex, ValidationReport)> {
    parse_ocr(&read(path.as_ref())?)
}

/// Parses an OCR file. Tokens with empty text or invalid boxes are skipped
/// with a warning; they never reject the file.
pub fn parse_ocr(text: &str) -> Result<(OcrIndex, ValidationReport)> {
    let raw: RawOcr = parse_json(text, "ocr")?;
    let mut report = ValidationReport::default();
    let mut index = OcrIndex::new();
    let mut tokens_total = 0;
    for (i, img) in raw.images.into_iter().enumerate() {
        let mut tokens = Vec::with_capacity(img.tokens.len());
        for (j, t) in img.tokens.into_iter().enumerate() {
            let loc = format!("images[{i}].tokens[{j}] ({})", img.image_id);
            let token = quad_from_raw(&t.bbox)
                .map_err(|(_, m)| m)
                .and_then(|b| OcrToken::new(t.text, b, t.confidence).map_err(|e| e.to_string()));
            match token {
                Ok(tok) => tokens.push(tok),
                Err(msg) => report.warn(loc, "invalid-token", format!("{msg}; token skipped")),
            }
        }
        tokens_total += tokens.len();
        index.insert(img.image_id, tokens);
    }
    report.totals.insert("images".into(), index.image_count());
    report.totals.insert("tokens".into(), tokens_total);
    Ok((index, report))
}

pub fn ocr_to_json(index: &OcrIndex) -> String {
    let images = index
        .images()
        .map(|(image_id, tokens)| OcrImageOut { image_id, tokens })
        .collect();
    serde_json::to_string_pretty(&OcrFile { images }).expect("ocr serializes")
}

/// What kind of file a JSON document looks like.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Dataset,
    Submission,
    Ocr,
}

pub fn sniff_kind(text: &str) -> Result<FileKind> {
    let v: serde_json::Value = parse_json(text, "file")?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("top-level JSON value must be an object".into()))?;
    if obj.contains_key("questions") {
        Ok(FileKind::Dataset)
    } else if obj.contains_key("tracks") {
        Ok(FileKind::Submission)
    } else if obj.contains_key("images") {
        Ok(FileKind::Ocr)
    } else {
        Err(Error::Parse("cannot tell file kind: expected \"questions\", \"tracks\" or \"images\"".into()))
    }
}

/// Frequencies of question prefixes, one level per word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixTree {
    pub count: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub children: BTreeMap<String, PrefixTree>,
}

impl PrefixTree {
    fn insert(&mut self, words: &[String]) {
        self.count += 1;
        if let Some((first, rest)) = words.split_first() {
            self.children.entry(first.clone()).or_default().insert(rest);
        }
    }

    /// Number of questions starting with `prefix`.
    pub fn count(&self, prefix: &[&str]) -> usize {
        match prefix.split_first() {
            None => self.count,
            Some((first, rest)) => self.children.get(*first).map_or(0, |c| c.count(rest)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub questions: usize,
    pub images: usize,
    pub question_length: BTreeMap<usize, usize>,
    pub answer_length: BTreeMap<usize, usize>,
    pub prefixes: PrefixTree,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub prefix_depth: usize,
    pub languages: BTreeMap<LanguageTag, LanguageStats>,
}

impl CorpusStats {
    pub fn total_questions(&self) -> usize {
        self.languages.values().map(|l| l.questions).sum()
    }

    pub fn total_images(&self) -> usize {
        self.languages.values().map(|l| l.images).sum()
    }
}

pub const PREFIX_DEPTH: usize = 4;

fn strip_punct(token: &str) -> &str {
    token.trim_matches(|c: char| c.is_ascii_punctuation() || "？，。！、：；“”‘’（）".contains(c))
}

fn words(text: &str, language: LanguageTag, tokenizer: &Tokenizer) -> Vec<String> {
    let normalized = normalize(text, &NormalizationPolicy::default());
    tokenizer
        .tokenize(&normalized, language)
        .iter()
        .map(|t| strip_punct(t))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Question/answer length histograms and first-words prefix frequencies per
/// language.
pub fn corpus_stats(dataset: &Dataset, tokenizer: &Tokenizer) -> CorpusStats {
    let mut stats = CorpusStats {
        prefix_depth: PREFIX_DEPTH,
        ..Default::default()
    };
    let counts = language_counts(dataset.records());
    for r in dataset.records() {
        let lang = stats.languages.entry(r.language).or_default();
        lang.questions += 1;
        let q = words(&r.question, r.language, tokenizer);
        *lang.question_length.entry(q.len()).or_default() += 1;
        let a = tokenizer.tokenize(&normalize(&r.answer, &NormalizationPolicy::default()), r.language);
        *lang.answer_length.entry(a.len()).or_default() += 1;
        lang.prefixes.insert(&q[..q.len().min(PREFIX_DEPTH)]);
    }
    for (lang, c) in counts {
        stats.languages.entry(lang).or_default().images = c.images;
    }
    stats
}
