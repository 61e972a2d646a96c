//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use evqa::oracles::{
    build_vocabulary, ocr_upper_bound, random_baseline, training_answers, vocab_upper_bound,
    VocabularyKind, DEFAULT_MAX_TOKENS,
};
use evqa::scoring::{score_questions, SweepParameter};
use evqa::{
    eve_score, iou, levenshtein, reasonable_score, score_clc, score_lc, score_tc, similarity_score,
    sweep, synth, EvidenceLabel, LanguageTag, OcrIndex, OcrToken, Prediction, QARecord, QuadBox,
    ScoringParams, Slice, Task, Track,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn delta_r_table() -> Outcome {
    let rows = [
        (3.0, 3.7, 0.81),
        (2.3, 4.2, 0.54),
        (2.3, 4.4, 0.52),
        (5.2, 8.2, 0.63),
        (3.8, 6.5, 0.58),
        (6.0, 7.3, 0.82),
        (5.7, 11.0, 0.52),
    ];
    let start = Instant::now();
    let got: Vec<Option<f64>> = rows.iter().map(|&(clc, tc, _)| reasonable_score(clc, tc)).collect();
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for (&(clc, tc, want), g) in rows.iter().zip(&got) {
        let g = g.ok_or_else(|| format!("no ratio for ({clc}, {tc})"))?;
        worst = worst.max((g - want).abs());
        ensure((g - want).abs() <= 0.01, || format!("{clc}/{tc} = {g:.4}, expected {want}"))?;
    }
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("7 pairs, max |error| {worst:.4} (2.3/4.2 = 0.548 vs 0.54), {elapsed:?}"))
}

fn perfect_submission() -> Outcome {
    let start = Instant::now();
    let f = synth::fixture(50, 3, 2024);
    let bundle = synth::perfect_bundle(&f.dataset, "echo");
    let params = ScoringParams::default();
    let tc = score_tc(&f.dataset, &bundle, &params).map_err(|e| e.to_string())?;
    let lc = score_lc(&f.dataset, &bundle, &params).map_err(|e| e.to_string())?;
    let clc = score_clc(&f.dataset, &bundle, &params).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(tc.acc() == 100.0 && clc.acc() == 100.0 && lc.acc() == 100.0, || {
        format!("TC {} CLC {} LC {}", tc.acc(), clc.acc(), lc.acc())
    })?;
    for s in Slice::ALL {
        if let Some(v) = clc.slice(s) {
            ensure(v == 100.0, || format!("CLC {s} = {v}"))?;
        }
    }
    ensure(clc.delta_r == Some(1.0), || format!("delta_r {:?}", clc.delta_r))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("TC = CLC = LC = 100.0, delta_r = 1.00, {elapsed:?}"))
}

fn spot_value() -> Outcome {
    let s = similarity_score("2012", "29/08/2012", 0.75).map_err(|e| e.to_string())?;
    ensure((s.value - 0.4).abs() <= 1e-9, || format!("s_l = {}", s.value))?;
    Ok(format!("s_l = {:.3} (distance {} over 10)", s.value, levenshtein("2012", "29/08/2012")))
}

fn evidence_tristate() -> Outcome {
    let gt = QuadBox::rect(0.0, 0.0, 10.0, 10.0).map_err(|e| e.to_string())?;
    let record = QARecord {
        question_id: "q".into(),
        image_id: "i".into(),
        language: LanguageTag::English,
        question: "what is the number".into(),
        answer: "708".into(),
        evidence: gt,
        human_answers: None,
    };
    let cases = [
        (QuadBox::rect(20.0, 20.0, 30.0, 30.0), 0.0, EvidenceLabel::Incorrect, 0.0),
        (QuadBox::rect(0.0, 0.0, 10.0, 3.0), 0.3, EvidenceLabel::Insufficient, 0.0),
        (QuadBox::rect(0.0, 0.0, 10.0, 7.0), 0.7, EvidenceLabel::Sufficient, 1.0),
    ];
    let params = ScoringParams::default();
    for (pred, want_iou, want_label, want_se) in cases {
        let pred = pred.map_err(|e| e.to_string())?;
        let got = iou(&gt, &pred);
        ensure((got - want_iou).abs() < 1e-12, || format!("iou {got}, expected {want_iou}"))?;
        let p = Prediction::new("q").with_answer("708").with_evidence(pred);
        let s = eve_score(&record, &p, &params).map_err(|e| e.to_string())?;
        let v = s.verdict.ok_or("no verdict")?;
        ensure(v.label == want_label && s.s_e == want_se && s.s_l == 1.0, || {
            format!("iou {want_iou}: {:?} s_e {}", v.label, s.s_e)
        })?;
    }
    Ok("IoU 0 / 0.3 / 0.7 -> Incorrect / Insufficient / Sufficient, s_e 0 / 0 / 1".into())
}

fn levenshtein_oracle() -> Outcome {
    let mut rng = common::rng(5);
    let pairs: Vec<(String, String)> = (0..1000)
        .map(|_| (common::mixed_string(&mut rng, 12), common::mixed_string(&mut rng, 12)))
        .collect();
    let start = Instant::now();
    for (a, b) in &pairs {
        let (fast, slow) = (levenshtein(a, b), common::levenshtein_recursive(a, b));
        ensure(fast == slow, || format!("{a:?} vs {b:?}: {fast} != {slow}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("1000 pairs exact, {elapsed:?}"))
}

fn iou_oracle() -> Outcome {
    let mut rng = common::rng(6);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut overlapping = 0;
    for _ in 0..200 {
        let (a, b) = common::convex_pair(&mut rng);
        let exact = iou(&a, &b);
        let mc = common::monte_carlo_iou(&a, &b, 100_000, &mut rng);
        overlapping += usize::from(exact > 0.0);
        worst = worst.max((exact - mc).abs());
        ensure((exact - mc).abs() <= 0.01, || format!("iou {exact} vs Monte Carlo {mc}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("200 pairs ({overlapping} overlapping), max |error| {worst:.4}, {elapsed:?}"))
}

fn monotone(points: &[evqa::SweepPoint], increasing: bool) -> Result<(), String> {
    for w in points.windows(2) {
        for s in Slice::ALL {
            if let (Some(a), Some(b)) = (w[0].report.slice(s), w[1].report.slice(s)) {
                let ok = if increasing { a <= b } else { a >= b };
                ensure(ok, || format!("{s}: {a} at {} then {b} at {}", w[0].value, w[1].value))?;
            }
        }
    }
    Ok(())
}

fn monotonicity() -> Outcome {
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let base = ScoringParams::default();
    let mut pointwise = 0usize;
    for seed in 0..100u64 {
        let f = synth::fixture(30, 2, seed);
        let bundle = synth::noisy_bundle(&f.dataset, seed + 1000);
        let run = |task, p| sweep(&f.dataset, &bundle, task, p, &grid, &base).map_err(|e| e.to_string());
        monotone(&run(Task::Tc, SweepParameter::Tau)?, true).map_err(|e| format!("seed {seed} TC tau: {e}"))?;
        monotone(&run(Task::Clc, SweepParameter::Tau)?, true).map_err(|e| format!("seed {seed} CLC tau: {e}"))?;
        monotone(&run(Task::Clc, SweepParameter::Theta)?, false)
            .map_err(|e| format!("seed {seed} CLC theta: {e}"))?;
        for track in Track::ALL {
            let preds = bundle.track(track).ok_or("missing track")?;
            for s in score_questions(&f.dataset, preds, track, &base).map_err(|e| e.to_string())? {
                pointwise += 1;
                ensure(s.s_e <= s.s_l, || format!("seed {seed} {}: s_e {} > s_l {}", s.question_id, s.s_e, s.s_l))?;
            }
        }
    }
    Ok(format!("100 fixtures x 20-point grids, {pointwise} pointwise s_e <= s_l checks"))
}

fn oracle_dominance() -> Outcome {
    let f = synth::fixture(60, 4, 77);
    let params = ScoringParams::default();
    let ub = ocr_upper_bound(&f.ocr, &f.dataset, &params, DEFAULT_MAX_TOKENS).map_err(|e| e.to_string())?;
    let mut best_random = 0.0f64;
    for seed in 0..100 {
        let r = random_baseline(&f.ocr, &f.dataset, seed, &params).map_err(|e| e.to_string())?;
        best_random = best_random.max(r.clc.acc());
        ensure(r.tc.acc() <= ub.tc.acc(), || format!("seed {seed}: random TC {} > UB {}", r.tc.acc(), ub.tc.acc()))?;
    }
    ensure(ub.clc.acc() >= best_random, || format!("UB {} < random {best_random}", ub.clc.acc()))?;

    let train = synth::fixture(200, 0, 78);
    let answers = training_answers(&train.dataset);
    let policy = params.policy;
    let sv = vocab_upper_bound(&build_vocabulary(&answers, VocabularyKind::Sv, &policy), &f.dataset, &params)
        .map_err(|e| e.to_string())?;
    let lv = vocab_upper_bound(&build_vocabulary(&answers, VocabularyKind::Lv, &policy), &f.dataset, &params)
        .map_err(|e| e.to_string())?;
    ensure(lv.clc.acc() >= sv.clc.acc(), || format!("LV {} < SV {}", lv.clc.acc(), sv.clc.acc()))?;

    let gt = QuadBox::rect(10.0, 10.0, 60.0, 30.0).map_err(|e| e.to_string())?;
    let dataset = evqa::Dataset::new(vec![QARecord {
        question_id: "exact".into(),
        image_id: "img".into(),
        language: LanguageTag::English,
        question: "what is the room number".into(),
        answer: "708".into(),
        evidence: gt,
        human_answers: None,
    }])
    .map_err(|e| e.to_string())?;
    let mut ocr = OcrIndex::new();
    let other = QuadBox::rect(100.0, 10.0, 140.0, 30.0).map_err(|e| e.to_string())?;
    ocr.insert(
        "img",
        vec![
            OcrToken::new("room", other, 0.8).map_err(|e| e.to_string())?,
            OcrToken::new("708", gt, 0.9).map_err(|e| e.to_string())?,
        ],
    );
    let exact = ocr_upper_bound(&ocr, &dataset, &params, DEFAULT_MAX_TOKENS).map_err(|e| e.to_string())?;
    let s_e = exact.choices[0].s_e;
    ensure(s_e == 1.0, || format!("exact-token s_e = {s_e}"))?;
    Ok(format!(
        "OCR UB CLC {:.1} >= best random {:.1}; LV {:.1} >= SV {:.1}; exact token s_e = 1.0",
        ub.clc.acc(),
        best_random,
        lv.clc.acc(),
        sv.clc.acc()
    ))
}

fn throughput() -> Outcome {
    let f = synth::fixture(5000, 2, 9);
    let bundle = synth::noisy_bundle(&f.dataset, 10);
    let params = ScoringParams::default();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    let run = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?;
        let start = Instant::now();
        let report = pool.install(|| score_clc(&f.dataset, &bundle, &params)).map_err(|e| e.to_string())?;
        Ok::<_, String>((report, start.elapsed()))
    };
    let (one, t1) = run(1)?;
    let (many, tn) = run(threads)?;
    within(t1.max(tn), Duration::from_secs(5))?;
    ensure(one == many, || "reports differ between thread counts".into())?;
    let bits = |r: &evqa::TaskReport| r.slices.values().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&one) == bits(&many), || "slice bits differ".into())?;
    Ok(format!("5000 questions: 1 thread {t1:?}, {threads} threads {tn:?}, identical reports"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 reasonable score arithmetic", delta_r_table),
        ("2 perfect submission end to end", perfect_submission),
        ("3 answer similarity spot value", spot_value),
        ("4 evidence tri-state", evidence_tristate),
        ("5 edit distance oracle", levenshtein_oracle),
        ("6 IoU Monte Carlo oracle", iou_oracle),
        ("7 monotonicity suites", monotonicity),
        ("8 oracle dominance", oracle_dominance),
        ("9 scoring throughput and determinism", throughput),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("[INFO] 10 server round trip: see the evqa-server acceptance target");
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
