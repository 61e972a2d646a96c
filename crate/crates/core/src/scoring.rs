//! Per-question answer and evidence scoring and per-task aggregation.
//!
//! Per-question work runs on the rayon pool; aggregation always sums in
//! dataset order so reports are bitwise identical for any worker count.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_iou, Polygon};
use crate::model::{
    answer_class_with, AnswerClass, Dataset, LanguageTag, PredictedBox, Prediction, QARecord,
    QuadBox, SubmissionBundle, Task, Track,
};
use crate::text::{
    check_ratio, normalize, normalized_levenshtein, NormalizationPolicy, SimilarityScore,
    DEFAULT_TAU,
};
use crate::tokenize::Tokenizer;

/// Default IoU threshold for sufficient evidence.
pub const DEFAULT_THETA: f64 = 0.5;

/// Scoring parameters, echoed in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub tau: f64,
    pub theta: f64,
    pub policy: NormalizationPolicy,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            theta: DEFAULT_THETA,
            policy: NormalizationPolicy::default(),
        }
    }
}

impl ScoringParams {
    pub fn new(tau: f64, theta: f64) -> Result<Self> {
        let p = Self {
            tau,
            theta,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio("tau", self.tau)?;
        check_ratio("theta", self.theta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceLabel {
    Incorrect,
    Insufficient,
    Sufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceVerdict {
    pub iou: f64,
    pub theta: f64,
    pub label: EvidenceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl EvidenceVerdict {
    pub fn from_iou(iou: f64, theta: f64) -> Self {
        let label = if iou <= 0.0 {
            EvidenceLabel::Incorrect
        } else if iou < theta {
            EvidenceLabel::Insufficient
        } else {
            EvidenceLabel::Sufficient
        };
        Self {
            iou,
            theta,
            label,
            diagnostic: None,
        }
    }

    fn incorrect(theta: f64, diagnostic: impl Into<String>) -> Self {
        Self {
            diagnostic: Some(diagnostic.into()),
            ..Self::from_iou(0.0, theta)
        }
    }

    pub fn is_sufficient(&self) -> bool {
        self.label == EvidenceLabel::Sufficient
    }
}

/// Classifies predicted evidence against the ground-truth box.
pub fn classify_evidence(
    gt_box: &QuadBox,
    pred_box: Option<&PredictedBox>,
    theta: f64,
) -> Result<EvidenceVerdict> {
    check_ratio("theta", theta)?;
    Ok(classify_unchecked(gt_box, pred_box, theta))
}

fn classify_unchecked(gt_box: &QuadBox, pred_box: Option<&PredictedBox>, theta: f64) -> EvidenceVerdict {
    match pred_box {
        None => EvidenceVerdict::incorrect(theta, "no evidence"),
        Some(PredictedBox::Degenerate { reason, .. }) => {
            EvidenceVerdict::incorrect(theta, format!("degenerate evidence: {reason}"))
        }
        Some(PredictedBox::Quad(q)) => {
            let iou = polygon_iou(&Polygon::from(gt_box), &Polygon::from(q));
            let mut v = EvidenceVerdict::from_iou(iou.value, theta);
            if iou.degenerate {
                v.diagnostic = Some("zero-area evidence".into());
            }
            v
        }
    }
}

/// Scores of one question under all three protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub language: LanguageTag,
    pub answer_class: AnswerClass,
    pub answered: bool,
    pub s_l: f64,
    pub verdict: Option<EvidenceVerdict>,
    pub s_e: f64,
}

impl QuestionScore {
    /// The per-question value a task aggregates.
    pub fn value(&self, task: Task) -> f64 {
        match task {
            Task::Tc => self.s_l,
            Task::Clc => self.s_e,
            Task::Lc => self.verdict.as_ref().map_or(0.0, |v| v.iou),
        }
    }
}

fn answer_similarity(record: &QARecord, answer: Option<&str>, params: &ScoringParams) -> f64 {
    let Some(answer) = answer else { return 0.0 };
    let ans = normalize(answer, &params.policy);
    let gt = normalize(&record.answer, &params.policy);
    SimilarityScore::from_nl(normalized_levenshtein(&ans, &gt), params.tau).value
}

fn gt_class(record: &QARecord, params: &ScoringParams) -> AnswerClass {
    answer_class_with(&record.answer, record.language, &Tokenizer::default(), &params.policy)
        .unwrap_or(AnswerClass::Short)
}

/// Scores a question with no prediction at all.
fn unanswered(record: &QARecord, params: &ScoringParams, with_evidence: bool) -> QuestionScore {
    QuestionScore {
        question_id: record.question_id.clone(),
        language: record.language,
        answer_class: gt_class(record, params),
        answered: false,
        s_l: 0.0,
        verdict: with_evidence.then(|| EvidenceVerdict::incorrect(params.theta, "no prediction")),
        s_e: 0.0,
    }
}

fn score_one(record: &QARecord, pred: &Prediction, params: &ScoringParams, with_evidence: bool) -> QuestionScore {
    let s_l = answer_similarity(record, pred.answer.as_deref(), params);
    let verdict = with_evidence
        .then(|| classify_unchecked(&record.evidence, pred.evidence.as_ref(), params.theta));
    let s_e = match &verdict {
        Some(v) if v.is_sufficient() => s_l,
        _ => 0.0,
    };
    QuestionScore {
        question_id: record.question_id.clone(),
        language: record.language,
        answer_class: gt_class(record, params),
        answered: true,
        s_l,
        verdict,
        s_e,
    }
}

/// Evidence-based score of one prediction: the answer similarity counts only
/// when the evidence is sufficient.
pub fn eve_score(record: &QARecord, pred: &Prediction, params: &ScoringParams) -> Result<QuestionScore> {
    params.validate()?;
    if pred.question_id != record.question_id {
        return Err(Error::UnmatchedPrediction(pred.question_id.clone()));
    }
    Ok(score_one(record, pred, params, true))
}

/// Matches a track's predictions to the dataset, rejecting unknown ids,
/// duplicates and wrong-language entries.
fn index_track<'a>(
    dataset: &Dataset,
    preds: &'a [Prediction],
    track: Track,
) -> Result<HashMap<&'a str, &'a Prediction>> {
    let mut by_id = HashMap::with_capacity(preds.len());
    for p in preds {
        let record = dataset
            .get(&p.question_id)
            .ok_or_else(|| Error::UnmatchedPrediction(p.question_id.clone()))?;
        if !track.covers(record.language) {
            return Err(Error::TrackMismatch {
                track: track.to_string(),
                question_id: p.question_id.clone(),
            });
        }
        if by_id.insert(p.question_id.as_str(), p).is_some() {
            return Err(Error::DuplicatePrediction(p.question_id.clone()));
        }
    }
    Ok(by_id)
}

/// Scores every dataset question covered by `track`, in dataset order.
/// Questions without a prediction score zero.
pub fn score_questions(
    dataset: &Dataset,
    preds: &[Prediction],
    track: Track,
    params: &ScoringParams,
) -> Result<Vec<QuestionScore>> {
    params.validate()?;
    let by_id = index_track(dataset, preds, track)?;
    let scores = dataset
        .records()
        .par_iter()
        .filter(|r| track.covers(r.language))
        .map(|r| match by_id.get(r.question_id.as_str()) {
            Some(p) => score_one(r, p, params, true),
            None => unanswered(r, params, true),
        })
        .collect();
    Ok(scores)
}

/// Report columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slice {
    #[serde(rename = "mono_en")]
    MonoEn,
    #[serde(rename = "mono_zh")]
    MonoZh,
    #[serde(rename = "bi_en")]
    BiEn,
    #[serde(rename = "bi_zh")]
    BiZh,
    #[serde(rename = "bi_s")]
    BiShort,
    #[serde(rename = "bi_l")]
    BiLong,
    #[serde(rename = "bi_acc")]
    BiAcc,
}

impl Slice {
    pub const ALL: [Slice; 7] = [
        Slice::MonoEn,
        Slice::MonoZh,
        Slice::BiEn,
        Slice::BiZh,
        Slice::BiShort,
        Slice::BiLong,
        Slice::BiAcc,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Slice::MonoEn => "mono_en",
            Slice::MonoZh => "mono_zh",
            Slice::BiEn => "bi_en",
            Slice::BiZh => "bi_zh",
            Slice::BiShort => "bi_s",
            Slice::BiLong => "bi_l",
            Slice::BiAcc => "bi_acc",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Slice::MonoEn => "Mono En",
            Slice::MonoZh => "Mono Ch",
            Slice::BiEn => "Bi En",
            Slice::BiZh => "Bi Ch",
            Slice::BiShort => "Bi S",
            Slice::BiLong => "Bi L",
            Slice::BiAcc => "Bi Acc",
        }
    }

    pub fn parse(s: &str) -> Option<Slice> {
        Slice::ALL.into_iter().find(|x| x.code() == s)
    }
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub incorrect: usize,
    pub insufficient: usize,
    pub sufficient: usize,
}

impl VerdictCounts {
    fn tally(scores: &[QuestionScore]) -> Self {
        let mut c = Self::default();
        for v in scores.iter().filter_map(|s| s.verdict.as_ref()) {
            match v.label {
                EvidenceLabel::Incorrect => c.incorrect += 1,
                EvidenceLabel::Insufficient => c.insufficient += 1,
                EvidenceLabel::Sufficient => c.sufficient += 1,
            }
        }
        c
    }
}

/// Aggregate scores for one task, as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub model: String,
    pub parameters: ScoringParams,
    pub slices: BTreeMap<Slice, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_tc_acc: Option<f64>,
    pub question_count: usize,
    pub unanswered_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<VerdictCounts>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub header: BTreeMap<String, String>,
}

impl TaskReport {
    pub fn acc(&self) -> f64 {
        self.slices.get(&Slice::BiAcc).copied().unwrap_or(0.0)
    }

    pub fn slice(&self, slice: Slice) -> Option<f64> {
        self.slices.get(&slice).copied()
    }
}

/// Mean of `values` as a percentage; `None` for an empty slice.
fn mean_percent<I: Iterator<Item = f64>>(values: I) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64 * 100.0)
}

fn bi_slices(scores: &[QuestionScore], task: Task, out: &mut BTreeMap<Slice, f64>) {
    let v = |s: &QuestionScore| s.value(task);
    let mut put = |slice, m: Option<f64>| {
        if let Some(m) = m {
            out.insert(slice, m);
        }
    };
    put(
        Slice::BiEn,
        mean_percent(scores.iter().filter(|s| s.language == LanguageTag::English).map(v)),
    );
    put(
        Slice::BiZh,
        mean_percent(scores.iter().filter(|s| s.language == LanguageTag::Chinese).map(v)),
    );
    if task != Task::Lc {
        put(
            Slice::BiShort,
            mean_percent(scores.iter().filter(|s| s.answer_class == AnswerClass::Short).map(v)),
        );
        put(
            Slice::BiLong,
            mean_percent(scores.iter().filter(|s| s.answer_class == AnswerClass::Long).map(v)),
        );
    }
    put(Slice::BiAcc, mean_percent(scores.iter().map(v)));
}

fn require_track(bundle: &SubmissionBundle, track: Track) -> Result<&[Prediction]> {
    bundle
        .track(track)
        .ok_or_else(|| Error::MissingTrack(track.to_string()))
}

fn covered(dataset: &Dataset, preds: &[Prediction]) -> bool {
    preds.iter().any(|p| dataset.get(&p.question_id).is_some())
}

fn mono_slices(
    dataset: &Dataset,
    bundle: &SubmissionBundle,
    task: Task,
    params: &ScoringParams,
    out: &mut BTreeMap<Slice, f64>,
) -> Result<()> {
    for (track, slice) in [(Track::MonoEn, Slice::MonoEn), (Track::MonoZh, Slice::MonoZh)] {
        if let Some(preds) = bundle.track(track) {
            let scores = score_questions(dataset, preds, track, params)?;
            if let Some(m) = mean_percent(scores.iter().map(|s| s.value(task))) {
                out.insert(slice, m);
            }
        }
    }
    Ok(())
}

fn base_report(task: Task, bundle: &SubmissionBundle, params: &ScoringParams, bi: &[QuestionScore]) -> TaskReport {
    TaskReport {
        task,
        model: bundle.model_name.clone(),
        parameters: *params,
        slices: BTreeMap::new(),
        delta_r: None,
        paired_tc_acc: None,
        question_count: bi.len(),
        unanswered_count: bi.iter().filter(|s| !s.answered).count(),
        verdicts: None,
        header: BTreeMap::new(),
    }
}

fn bi_scores(
    dataset: &Dataset,
    bundle: &SubmissionBundle,
    params: &ScoringParams,
    allow_empty: bool,
) -> Result<Vec<QuestionScore>> {
    let bi = require_track(bundle, Track::Bi)?;
    if !allow_empty && !covered(dataset, bi) {
        // Unknown ids are reported as such before the emptiness check.
        index_track(dataset, bi, Track::Bi)?;
        return Err(Error::EmptySubmission);
    }
    score_questions(dataset, bi, Track::Bi, params)
}

/// Traditional challenge: answer similarity only, evidence ignored. Mono
/// columns are filled when the bundle carries mono tracks.
pub fn score_tc(dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams) -> Result<TaskReport> {
    tc_report(dataset, bundle, params, false)
}

fn tc_report(dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams, allow_empty: bool) -> Result<TaskReport> {
    let bi = bi_scores(dataset, bundle, params, allow_empty)?;
    let mut report = base_report(Task::Tc, bundle, params, &bi);
    mono_slices(dataset, bundle, Task::Tc, params, &mut report.slices)?;
    bi_slices(&bi, Task::Tc, &mut report.slices);
    Ok(report)
}

/// Localization challenge: mean IoU of the bilingual track's evidence.
pub fn score_lc(dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams) -> Result<TaskReport> {
    lc_report(dataset, bundle, params, false)
}

fn lc_report(dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams, allow_empty: bool) -> Result<TaskReport> {
    let bi = bi_scores(dataset, bundle, params, allow_empty)?;
    let mut report = base_report(Task::Lc, bundle, params, &bi);
    bi_slices(&bi, Task::Lc, &mut report.slices);
    report.verdicts = Some(VerdictCounts::tally(&bi));
    Ok(report)
}

/// Cross-language challenge: evidence-based scores for the two mono tracks
/// and the bilingual track. The reasonable score is taken against the TC
/// accuracy of the same bilingual predictions.
pub fn score_clc(dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams) -> Result<TaskReport> {
    clc_report(dataset, bundle, params, false)
}

fn clc_report(dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams, allow_empty: bool) -> Result<TaskReport> {
    for track in Task::Clc.required_tracks() {
        require_track(bundle, *track)?;
    }
    let bi = bi_scores(dataset, bundle, params, allow_empty)?;
    let mut report = base_report(Task::Clc, bundle, params, &bi);
    mono_slices(dataset, bundle, Task::Clc, params, &mut report.slices)?;
    bi_slices(&bi, Task::Clc, &mut report.slices);
    let tc_acc = mean_percent(bi.iter().map(|s| s.s_l)).unwrap_or(0.0);
    report.paired_tc_acc = Some(tc_acc);
    report.delta_r = reasonable_score(report.acc(), tc_acc);
    report.verdicts = Some(VerdictCounts::tally(&bi));
    Ok(report)
}

pub fn score(task: Task, dataset: &Dataset, bundle: &SubmissionBundle, params: &ScoringParams) -> Result<TaskReport> {
    match task {
        Task::Tc => score_tc(dataset, bundle, params),
        Task::Lc => score_lc(dataset, bundle, params),
        Task::Clc => score_clc(dataset, bundle, params),
    }
}

/// Like [`score`], but a bundle that covers no question scores zero instead
/// of failing. Used for oracle outputs.
pub(crate) fn score_allow_empty(
    task: Task,
    dataset: &Dataset,
    bundle: &SubmissionBundle,
    params: &ScoringParams,
) -> Result<TaskReport> {
    match task {
        Task::Tc => tc_report(dataset, bundle, params, true),
        Task::Lc => lc_report(dataset, bundle, params, true),
        Task::Clc => clc_report(dataset, bundle, params, true),
    }
}

/// Share of TC accuracy that survives the evidence check. `None` when the
/// TC accuracy is zero.
pub fn reasonable_score(clc_acc: f64, tc_acc: f64) -> Option<f64> {
    (tc_acc > 0.0).then(|| clc_acc / tc_acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Tau,
    Theta,
}

impl SweepParameter {
    pub fn code(self) -> &'static str {
        match self {
            SweepParameter::Tau => "tau",
            SweepParameter::Theta => "theta",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(SweepParameter::Tau),
            "theta" => Ok(SweepParameter::Theta),
            other => Err(Error::InvalidParameter(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: TaskReport,
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    for v in grid {
        check_ratio("grid value", *v)?;
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sweep grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One report per grid value of `parameter`, everything else fixed.
pub fn sweep(
    dataset: &Dataset,
    bundle: &SubmissionBundle,
    task: Task,
    parameter: SweepParameter,
    grid: &[f64],
    base: &ScoringParams,
) -> Result<Vec<SweepPoint>> {
    validate_grid(grid)?;
    grid.iter()
        .map(|&value| {
            let mut params = *base;
            match parameter {
                SweepParameter::Tau => params.tau = value,
                SweepParameter::Theta => params.theta = value,
            }
            Ok(SweepPoint {
                value,
                report: score(task, dataset, bundle, &params)?,
            })
        })
        .collect()
}
