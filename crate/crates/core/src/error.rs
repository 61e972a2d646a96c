use std::path::PathBuf;

use crate::ingest::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid answer: {0}")]
    InvalidAnswer(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("duplicate question_id {0:?} in dataset")]
    DuplicateQuestion(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("prediction for unknown question_id {0:?}")]
    UnmatchedPrediction(String),
    #[error("duplicate prediction for question_id {0:?}")]
    DuplicatePrediction(String),
    #[error("submission does not cover any ground-truth question")]
    EmptySubmission,
    #[error("track {track} contains question {question_id:?} of the wrong language")]
    TrackMismatch { track: String, question_id: String },
    #[error("missing track {0}")]
    MissingTrack(String),
    #[error("metric not supported for this record: {0}")]
    UnsupportedMetric(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed with {} error(s): {}", .0.errors.len(), first_errors(.0))]
    Invalid(Box<ValidationReport>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn first_errors(report: &ValidationReport) -> String {
    let mut shown: Vec<String> = report.errors.iter().take(3).map(ToString::to_string).collect();
    if report.errors.len() > 3 {
        shown.push(format!("and {} more", report.errors.len() - 3));
    }
    shown.join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
