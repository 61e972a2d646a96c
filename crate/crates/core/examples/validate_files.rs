// Writes a dataset and a submission with a few mistakes to disk, then
// validates them in strict and lenient mode.

use evqa::ingest::dataset_to_json;
use evqa::{load_dataset, load_submission, synth, Error, Task, ValidationMode};

pub fn run_example() -> anyhow::Result<String> {
    let dir = tempfile::tempdir()?;
    let fixture = synth::fixture(6, 1, 8);
    let gt_path = dir.path().join("gt.json");
    std::fs::write(&gt_path, dataset_to_json(&fixture.dataset))?;
    let (dataset, report) = load_dataset(&gt_path, ValidationMode::Strict)?;
    let mut out = format!("ground truth:\n{report}\n");

    let mut sub: serde_json::Value = serde_json::from_str(&synth::perfect_bundle(&dataset, "demo").to_json())?;
    let bi = sub["tracks"]["bi"].as_array_mut().expect("bi track");
    bi.push(serde_json::json!({"question_id": "q_99999", "answer": "ghost"}));
    bi[0]["evidence"] = serde_json::json!([[0, 0], [5, 5], [10, 10], [15, 15]]);
    let sub_path = dir.path().join("submission.json");
    std::fs::write(&sub_path, sub.to_string())?;

    match load_submission(&sub_path, &dataset, Task::Clc, ValidationMode::Strict) {
        Err(Error::Invalid(report)) => out.push_str(&format!("strict:\n{report}\n")),
        other => anyhow::bail!("expected a strict failure, got {other:?}"),
    }
    let (_, report) = load_submission(&sub_path, &dataset, Task::Clc, ValidationMode::Lenient)?;
    out.push_str(&format!("lenient:\n{report}\n"));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
