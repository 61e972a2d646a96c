//! Shared domain types: evidence quads, ground-truth records, predictions,
//! submission bundles and OCR tokens.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::text::{normalize, NormalizationPolicy};
use crate::tokenize::Tokenizer;

/// A quadrilateral in image pixel coordinates, stored counter-clockwise
/// (positive shoelace area).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadBox {
    vertices: [Point; 4],
}

impl QuadBox {
    /// Validates and orients four vertices. Clockwise input is reversed.
    pub fn new(vertices: [Point; 4]) -> Result<Self> {
        for p in &vertices {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidGeometry("quad coordinates must be finite".into()));
            }
            if p.x < 0.0 || p.y < 0.0 {
                return Err(Error::InvalidGeometry("quad coordinates must be non-negative".into()));
            }
        }
        let signed = geometry::signed_area(&vertices);
        if signed.abs() <= geometry::AREA_EPS {
            return Err(Error::InvalidGeometry("quad has zero area".into()));
        }
        if !geometry::is_simple_quad(&vertices) {
            return Err(Error::InvalidGeometry("quad is self-intersecting".into()));
        }
        let mut vertices = vertices;
        if signed < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Accepts any slice of `[x, y]` pairs, as found in the JSON files.
    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        if pairs.len() != 4 {
            return Err(Error::InvalidGeometry(format!(
                "quad must have 4 vertices, got {}",
                pairs.len()
            )));
        }
        let mut pts = [Point::default(); 4];
        for (dst, src) in pts.iter_mut().zip(pairs) {
            *dst = Point::new(src[0], src[1]);
        }
        Self::new(pts)
    }

    /// Axis-aligned rectangle from its min/max corners.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new([
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.vertices)
    }

    pub fn to_pairs(&self) -> [[f64; 2]; 4] {
        self.vertices.map(|p| [p.x, p.y])
    }

    /// Smallest axis-aligned box enclosing all the given quads.
    pub fn enclosing<'a, I>(boxes: I) -> Option<QuadBox>
    where
        I: IntoIterator<Item = &'a QuadBox>,
    {
        let mut it = boxes.into_iter().peekable();
        it.peek()?;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for b in it {
            for p in b.vertices() {
                x0 = x0.min(p.x);
                y0 = y0.min(p.y);
                x1 = x1.max(p.x);
                y1 = y1.max(p.y);
            }
        }
        QuadBox::rect(x0, y0, x1, y1).ok()
    }
}

impl Serialize for QuadBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuadBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        QuadBox::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

/// Evidence attached to a prediction. Malformed boxes are kept so they can be
/// scored as `Incorrect` instead of failing the whole submission.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictedBox {
    Quad(QuadBox),
    Degenerate { pairs: Vec<[f64; 2]>, reason: String },
}

impl PredictedBox {
    pub fn from_pairs(pairs: Vec<[f64; 2]>) -> Self {
        match QuadBox::from_pairs(&pairs) {
            Ok(q) => PredictedBox::Quad(q),
            Err(e) => PredictedBox::Degenerate {
                pairs,
                reason: e.to_string(),
            },
        }
    }

    pub fn quad(&self) -> Option<&QuadBox> {
        match self {
            PredictedBox::Quad(q) => Some(q),
            PredictedBox::Degenerate { .. } => None,
        }
    }
}

impl From<QuadBox> for PredictedBox {
    fn from(q: QuadBox) -> Self {
        PredictedBox::Quad(q)
    }
}

impl Serialize for PredictedBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PredictedBox::Quad(q) => q.serialize(serializer),
            PredictedBox::Degenerate { pairs, .. } => pairs.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for PredictedBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(PredictedBox::from_pairs(Vec::<[f64; 2]>::deserialize(deserializer)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LanguageTag {
    #[serde(rename = "en")]
    English,
    #[serde(rename = "zh")]
    Chinese,
}

impl LanguageTag {
    pub const ALL: [LanguageTag; 2] = [LanguageTag::English, LanguageTag::Chinese];

    pub fn code(self) -> &'static str {
        match self {
            LanguageTag::English => "en",
            LanguageTag::Chinese => "zh",
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LanguageTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(LanguageTag::English),
            "zh" => Ok(LanguageTag::Chinese),
            other => Err(Error::Parse(format!("unknown language tag {other:?}"))),
        }
    }
}

/// One ground-truth question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QARecord {
    pub question_id: String,
    pub image_id: String,
    pub language: LanguageTag,
    pub question: String,
    pub answer: String,
    pub evidence: QuadBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_answers: Option<Vec<String>>,
}

impl QARecord {
    /// Checks the per-record dataset rules: non-empty question and answer,
    /// and no yes/no answers.
    pub fn check(&self) -> Result<()> {
        let policy = NormalizationPolicy::default();
        if self.question_id.is_empty() {
            return Err(Error::InvalidRecord("question_id is empty".into()));
        }
        if normalize(&self.question, &policy).is_empty() {
            return Err(Error::InvalidRecord("question is empty".into()));
        }
        let answer = normalize(&self.answer, &policy);
        if answer.is_empty() {
            return Err(Error::InvalidAnswer("answer is empty".into()));
        }
        if is_yes_no(&answer) {
            return Err(Error::InvalidRecord(
                "yes/no answers are not allowed in the dataset".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn is_yes_no(normalized: &str) -> bool {
    normalized.eq_ignore_ascii_case("yes") || normalized.eq_ignore_ascii_case("no")
}

/// A validated ground-truth set with unique question ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    version: String,
    records: Vec<QARecord>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub const VERSION: &'static str = "1.0";

    pub fn new(records: Vec<QARecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.check()
                .map_err(|e| Error::InvalidRecord(format!("{}: {e}", r.question_id)))?;
            if index.insert(r.question_id.clone(), i).is_some() {
                return Err(Error::DuplicateQuestion(r.question_id.clone()));
            }
        }
        Ok(Self {
            version: Self::VERSION.to_string(),
            records,
            index,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn records(&self) -> &[QARecord] {
        &self.records
    }

    pub fn get(&self, question_id: &str) -> Option<&QARecord> {
        self.index.get(question_id).map(|&i| &self.records[i])
    }

    pub fn position(&self, question_id: &str) -> Option<usize> {
        self.index.get(question_id).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn language_count(&self, language: LanguageTag) -> usize {
        self.records.iter().filter(|r| r.language == language).count()
    }
}

/// A model's output for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<PredictedBox>,
}

impl Prediction {
    pub fn new(question_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            answer: None,
            evidence: None,
        }
    }

    pub fn with_answer(mut self, answer: impl Into<String>) -> Self {
        self.answer = Some(answer.into());
        self
    }

    pub fn with_evidence(mut self, evidence: impl Into<PredictedBox>) -> Self {
        self.evidence = Some(evidence.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Clc,
    Lc,
    Tc,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Clc, Task::Lc, Task::Tc];

    pub fn code(self) -> &'static str {
        match self {
            Task::Clc => "clc",
            Task::Lc => "lc",
            Task::Tc => "tc",
        }
    }

    pub fn needs_answer(self) -> bool {
        matches!(self, Task::Clc | Task::Tc)
    }

    pub fn needs_evidence(self) -> bool {
        matches!(self, Task::Clc | Task::Lc)
    }

    pub fn required_tracks(self) -> &'static [Track] {
        match self {
            Task::Clc => &Track::ALL,
            Task::Lc | Task::Tc => &[Track::Bi],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clc" => Ok(Task::Clc),
            "lc" => Ok(Task::Lc),
            "tc" => Ok(Task::Tc),
            other => Err(Error::Parse(format!("unknown task {other:?}"))),
        }
    }
}

/// Prediction track: monolingual English, monolingual Chinese or bilingual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    MonoEn,
    MonoZh,
    Bi,
}

impl Track {
    pub const ALL: [Track; 3] = [Track::MonoEn, Track::MonoZh, Track::Bi];

    /// The language a track is restricted to, if any.
    pub fn language(self) -> Option<LanguageTag> {
        match self {
            Track::MonoEn => Some(LanguageTag::English),
            Track::MonoZh => Some(LanguageTag::Chinese),
            Track::Bi => None,
        }
    }

    pub fn covers(self, language: LanguageTag) -> bool {
        self.language().is_none_or(|l| l == language)
    }

    pub fn code(self) -> &'static str {
        match self {
            Track::MonoEn => "mono_en",
            Track::MonoZh => "mono_zh",
            Track::Bi => "bi",
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A model's predictions for one challenge. This is also the submission
/// file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionBundle {
    pub task: Task,
    #[serde(rename = "model")]
    pub model_name: String,
    pub tracks: BTreeMap<Track, Vec<Prediction>>,
}

impl SubmissionBundle {
    /// Bundle with only the bilingual track.
    pub fn bilingual(task: Task, model_name: impl Into<String>, bi: Vec<Prediction>) -> Self {
        let mut tracks = BTreeMap::new();
        tracks.insert(Track::Bi, bi);
        Self {
            task,
            model_name: model_name.into(),
            tracks,
        }
    }

    /// CLC bundle whose mono tracks are the language subsets of `bi`.
    pub fn split_from_bilingual(
        model_name: impl Into<String>,
        dataset: &Dataset,
        bi: Vec<Prediction>,
    ) -> Self {
        let mut tracks = BTreeMap::new();
        for track in [Track::MonoEn, Track::MonoZh] {
            let subset = bi
                .iter()
                .filter(|p| {
                    dataset
                        .get(&p.question_id)
                        .is_some_and(|r| track.covers(r.language))
                })
                .cloned()
                .collect();
            tracks.insert(track, subset);
        }
        tracks.insert(Track::Bi, bi);
        Self {
            task: Task::Clc,
            model_name: model_name.into(),
            tracks,
        }
    }

    pub fn track(&self, track: Track) -> Option<&[Prediction]> {
        self.tracks.get(&track).map(Vec::as_slice)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

/// A recognized text span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrToken {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: QuadBox,
    pub confidence: f64,
}

impl OcrToken {
    pub fn new(text: impl Into<String>, bbox: QuadBox, confidence: f64) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidRecord("OCR token text is empty".into()));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidRecord(format!(
                "OCR confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            text,
            bbox,
            confidence,
        })
    }
}

/// OCR results for a set of images, keyed by image id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OcrIndex {
    images: BTreeMap<String, Vec<OcrToken>>,
}

impl OcrIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_id: impl Into<String>, tokens: Vec<OcrToken>) {
        self.images.entry(image_id.into()).or_default().extend(tokens);
    }

    /// Tokens for an image, empty when the image is unknown.
    pub fn tokens(&self, image_id: &str) -> &[OcrToken] {
        self.images.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn images(&self) -> impl Iterator<Item = (&str, &[OcrToken])> {
        self.images.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerClass {
    Short,
    Long,
}

/// Short iff the language's tokenizer yields exactly one token.
pub fn answer_class(answer: &str, language: LanguageTag) -> Result<AnswerClass> {
    answer_class_with(answer, language, &Tokenizer::default(), &NormalizationPolicy::default())
}

pub fn answer_class_with(
    answer: &str,
    language: LanguageTag,
    tokenizer: &Tokenizer,
    policy: &NormalizationPolicy,
) -> Result<AnswerClass> {
    let normalized = normalize(answer, policy);
    match tokenizer.tokenize(&normalized, language).len() {
        0 => Err(Error::InvalidAnswer("answer is empty after normalization".into())),
        1 => Ok(AnswerClass::Short),
        _ => Ok(AnswerClass::Long),
    }
}
