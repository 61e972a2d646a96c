// Scores a noisy synthetic submission under all three tasks and prints the
// comparison table.

use evqa::{render_table, score, synth, ScoringParams, Task};

pub fn run_example() -> anyhow::Result<String> {
    let fixture = synth::fixture(200, 3, 11);
    let params = ScoringParams::default();
    let mut reports = Vec::new();
    for (name, bundle) in [
        ("echo", synth::perfect_bundle(&fixture.dataset, "echo")),
        ("noisy", synth::noisy_bundle(&fixture.dataset, 12)),
    ] {
        for task in Task::ALL {
            let mut r = score(task, &fixture.dataset, &bundle, &params)?;
            r.model = name.to_string();
            reports.push(r);
        }
    }
    Ok(render_table(&reports))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
