// Thresholded answer similarity and the VQA accuracy it replaces.

use evqa::{answer_class, similarity_score, vqa_accuracy, LanguageTag, NormalizationPolicy, DEFAULT_TAU};

pub fn run_example() -> anyhow::Result<String> {
    let pairs = [
        ("2012", "29/08/2012", LanguageTag::English),
        ("Coca Cola", "coca-cola", LanguageTag::English),
        ("河南中路", "河南中路", LanguageTag::Chinese),
        ("河南路", "河南中路", LanguageTag::Chinese),
        ("exit", "708", LanguageTag::English),
    ];
    let mut out = String::new();
    for (ans, gt, lang) in pairs {
        let s = similarity_score(ans, gt, DEFAULT_TAU)?;
        let class = answer_class(gt, lang)?;
        out.push_str(&format!("{ans:>10} vs {gt:<12} NL={:.3} s_l={:.3} {class:?}\n", s.nl, s.value));
    }
    let humans: Vec<String> = ["708", "708", "room 708", "708"].map(String::from).to_vec();
    let acc = vqa_accuracy("708", Some(&humans), &NormalizationPolicy::default())?;
    out.push_str(&format!("vqa accuracy of \"708\" against 4 annotators: {acc:.3}\n"));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
