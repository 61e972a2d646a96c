// CLC score as a function of the similarity threshold, as CSV.

use evqa::scoring::SweepParameter;
use evqa::{render_sweep, sweep, synth, Format, ScoringParams, Slice, Task};

pub fn run_example() -> anyhow::Result<String> {
    let fixture = synth::fixture(400, 2, 3);
    let bundle = synth::noisy_bundle(&fixture.dataset, 4);
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let points = sweep(
        &fixture.dataset,
        &bundle,
        Task::Clc,
        SweepParameter::Tau,
        &grid,
        &ScoringParams::default(),
    )?;
    Ok(render_sweep(&points, SweepParameter::Tau, &[Slice::BiEn, Slice::BiZh, Slice::BiAcc], Format::Csv))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
