// Question and answer length histograms and the most common question
// openings per language.

use evqa::{corpus_stats, synth, Tokenizer};

pub fn run_example() -> anyhow::Result<String> {
    let fixture = synth::fixture(500, 0, 5);
    let stats = corpus_stats(&fixture.dataset, &Tokenizer::default());
    let mut out = String::new();
    for (lang, s) in &stats.languages {
        out.push_str(&format!("{lang}: {} questions, {} images\n", s.questions, s.images));
        out.push_str(&format!("  answer lengths: {:?}\n", s.answer_length));
        let mut openings: Vec<(&String, usize)> = s.prefixes.children.iter().map(|(w, t)| (w, t.count)).collect();
        openings.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (word, n) in openings.iter().take(3) {
            out.push_str(&format!("  starts with {word:?}: {n}\n"));
        }
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
