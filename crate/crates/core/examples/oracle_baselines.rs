// Upper bounds and the random OCR baseline on a synthetic fixture, plus
// evidence attachment for an answer-only submission.

use evqa::oracles::{
    attach_evidence_bundle, build_vocabulary, ocr_upper_bound, random_baseline, training_answers,
    vocab_upper_bound, VocabularyKind, DEFAULT_MAX_TOKENS,
};
use evqa::{render_table, score_clc, synth, Prediction, ScoringParams, SubmissionBundle};

pub fn run_example() -> anyhow::Result<String> {
    let train = synth::fixture(300, 0, 1);
    let test = synth::fixture(100, 4, 2);
    let params = ScoringParams::default();
    let answers = training_answers(&train.dataset);

    let mut reports = Vec::new();
    for kind in [VocabularyKind::Sv, VocabularyKind::Lv] {
        let vocab = build_vocabulary(&answers, kind, &params.policy);
        reports.push(vocab_upper_bound(&vocab, &test.dataset, &params)?.clc);
    }
    reports.push(ocr_upper_bound(&test.ocr, &test.dataset, &params, DEFAULT_MAX_TOKENS)?.clc);
    reports.push(random_baseline(&test.ocr, &test.dataset, 7, &params)?.clc);

    let answer_only: Vec<Prediction> = test
        .dataset
        .records()
        .iter()
        .map(|r| Prediction::new(&r.question_id).with_answer(&r.answer))
        .collect();
    let bundle = SubmissionBundle::split_from_bilingual("answers+attached", &test.dataset, answer_only);
    let attached = attach_evidence_bundle(&bundle, &test.dataset, &test.ocr, 7, &params.policy);
    reports.push(score_clc(&test.dataset, &attached, &params)?);
    Ok(render_table(&reports))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
