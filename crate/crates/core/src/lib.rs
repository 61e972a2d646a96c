//! Evaluation toolkit for evidence-based scene-text visual question
//! answering.
//!
//! A prediction is an answer string plus an evidence quadrilateral. Three
//! challenges are scored:
//!
//! * **TC** (traditional): thresholded normalized Levenshtein similarity of
//!   the answer, evidence ignored.
//! * **LC** (localization): IoU of the evidence box with the ground truth.
//! * **CLC** (cross language): the answer similarity counts only when the
//!   evidence IoU reaches `theta`; scored separately for English-only,
//!   Chinese-only and bilingual prediction tracks.
//!
//! The ratio of CLC to TC accuracy of the same predictions, the reasonable
//! score, measures how many correct answers are backed by evidence.
//!
//! ```
//! use evqa::{score_clc, synth, ScoringParams};
//!
//! let fixture = synth::fixture(10, 2, 42);
//! let bundle = synth::perfect_bundle(&fixture.dataset, "echo");
//! let report = score_clc(&fixture.dataset, &bundle, &ScoringParams::default()).unwrap();
//! assert_eq!(report.acc(), 100.0);
//! assert_eq!(report.delta_r, Some(1.0));
//! ```

pub mod error;
pub mod geometry;
pub mod ingest;
pub mod model;
pub mod oracles;
pub mod report;
pub mod scoring;
pub mod synth;
pub mod text;
pub mod tokenize;

pub use error::{Error, Result};
pub use geometry::{iou, Point, Polygon};
pub use ingest::{
    corpus_stats, load_dataset, load_ocr, load_submission, CorpusStats, Issue, ValidationMode,
    ValidationReport,
};
pub use model::{
    answer_class, AnswerClass, Dataset, LanguageTag, OcrIndex, OcrToken, PredictedBox, Prediction,
    QARecord, QuadBox, SubmissionBundle, Task, Track,
};
pub use report::{render_report, render_sweep, render_table, Format};
pub use scoring::{
    classify_evidence, eve_score, reasonable_score, score, score_clc, score_lc, score_tc, sweep,
    EvidenceLabel, EvidenceVerdict, QuestionScore, ScoringParams, Slice, SweepParameter,
    SweepPoint, TaskReport, DEFAULT_THETA,
};
pub use text::{
    levenshtein, normalize, normalized_levenshtein, similarity_score, vqa_accuracy,
    NormalizationPolicy, SimilarityScore, DEFAULT_TAU,
};
pub use tokenize::Tokenizer;
