// Evidence boxes: IoU of quadrilaterals and the three-way verdict.

use evqa::{classify_evidence, iou, PredictedBox, QuadBox, DEFAULT_THETA};

pub fn run_example() -> anyhow::Result<String> {
    let gt = QuadBox::from_pairs(&[[10.0, 10.0], [110.0, 20.0], [105.0, 60.0], [5.0, 50.0]])?;
    let candidates = [
        ("exact", QuadBox::from_pairs(&gt.to_pairs())?),
        ("shifted", QuadBox::rect(40.0, 15.0, 130.0, 55.0)?),
        ("sliver", QuadBox::rect(10.0, 10.0, 40.0, 20.0)?),
        ("elsewhere", QuadBox::rect(300.0, 300.0, 340.0, 320.0)?),
    ];
    let mut out = String::new();
    for (name, b) in candidates {
        let v = classify_evidence(&gt, Some(&PredictedBox::Quad(b)), DEFAULT_THETA)?;
        out.push_str(&format!("{name:<10} iou={:.3} {:?}\n", iou(&gt, &b), v.label));
    }
    let bad = PredictedBox::from_pairs(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
    let v = classify_evidence(&gt, Some(&bad), DEFAULT_THETA)?;
    out.push_str(&format!("degenerate {:?} ({})\n", v.label, v.diagnostic.unwrap_or_default()));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
