//! Deterministic synthetic bilingual fixtures: ground truth, matching OCR
//! output, and perfect or noisy submissions.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Dataset, LanguageTag, OcrIndex, OcrToken, Prediction, QARecord, QuadBox, SubmissionBundle,
};
use crate::oracles::uniform_index;

const EN_WORDS: &[&str] = &[
    "coca", "cola", "red", "bull", "exit", "station", "pharmacy", "bakery", "hotel", "market",
    "708", "2012", "sale", "open", "street", "cafe", "bank", "parking", "museum", "library",
    "north", "gate", "fresh", "coffee", "pizza", "garden", "central", "avenue", "taxi", "metro",
];
const ZH_WORDS: &[&str] = &[
    "河南", "中路", "伟业", "水电", "安装", "超市", "银行", "药店", "酒店", "出口", "地铁",
    "公园", "咖啡", "面包", "书店", "医院", "学校", "广场", "大厦", "停车",
];
const EN_QUESTIONS: &[&str] = &[
    "what is the name of the shop",
    "what is written on the sign",
    "what is the room number",
    "what brand is shown here",
    "what is the name of the street",
    "which station is this",
];
const ZH_QUESTIONS: &[&str] = &[
    "这家店叫什么名字",
    "牌子上写的是什么",
    "这是什么路",
    "联系人是谁",
    "这里是哪个站",
];

/// A ground-truth set with OCR output for its images.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub dataset: Dataset,
    pub ocr: OcrIndex,
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items[uniform_index(rng, items.len())]
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Builds `questions` questions (alternating English and Chinese), one image
/// per question. Each image's OCR holds the answer words, laid out left to
/// right inside the evidence box, plus `distractors` unrelated tokens.
pub fn fixture(questions: usize, distractors: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(questions);
    let mut ocr = OcrIndex::new();
    for i in 0..questions {
        let language = if i % 2 == 0 { LanguageTag::English } else { LanguageTag::Chinese };
        let (words, templates, sep) = match language {
            LanguageTag::English => (EN_WORDS, EN_QUESTIONS, " "),
            LanguageTag::Chinese => (ZH_WORDS, ZH_QUESTIONS, ""),
        };
        let n_words = 1 + uniform_index(&mut rng, 3).min(uniform_index(&mut rng, 3));
        let answer_words: Vec<&str> = (0..n_words).map(|_| pick(&mut rng, words)).collect();
        let x0 = 20.0 + 200.0 * unit(&mut rng);
        let y0 = 20.0 + 200.0 * unit(&mut rng);
        let h = 12.0 + 20.0 * unit(&mut rng);
        let mut tokens = Vec::new();
        let mut x = x0;
        for w in &answer_words {
            let width = h * 0.6 * w.chars().count() as f64;
            let b = QuadBox::rect(x, y0, x + width, y0 + h).expect("positive box");
            tokens.push(OcrToken::new(*w, b, 0.9).expect("valid token"));
            x += width + h * 0.3;
        }
        let evidence = QuadBox::enclosing(tokens.iter().map(|t| &t.bbox)).expect("non-empty");
        for d in 0..distractors {
            let dy = y0 + h * 2.0 * (d as f64 + 1.0);
            let w = pick(&mut rng, words);
            let width = h * 0.6 * w.chars().count() as f64;
            let b = QuadBox::rect(x0, dy, x0 + width, dy + h).expect("positive box");
            tokens.push(OcrToken::new(w, b, 0.5).expect("valid token"));
        }
        let image_id = format!("img_{i:05}");
        let question_id = format!("q_{i:05}");
        let mut answer = answer_words.join(sep);
        if answer.eq_ignore_ascii_case("yes") || answer.eq_ignore_ascii_case("no") {
            answer.push('!');
        }
        records.push(QARecord {
            question_id,
            image_id: image_id.clone(),
            language,
            question: pick(&mut rng, templates).to_string(),
            answer,
            evidence,
            human_answers: None,
        });
        ocr.insert(image_id, tokens);
    }
    Fixture {
        dataset: Dataset::new(records).expect("synthetic records are valid"),
        ocr,
    }
}

/// Echoes the ground truth in all three tracks.
pub fn perfect_bundle(dataset: &Dataset, model: &str) -> SubmissionBundle {
    let bi = dataset
        .records()
        .iter()
        .map(|r| {
            Prediction::new(&r.question_id)
                .with_answer(&r.answer)
                .with_evidence(r.evidence)
        })
        .collect();
    SubmissionBundle::split_from_bilingual(model, dataset, bi)
}

fn perturb(answer: &str, rng: &mut ChaCha8Rng, edits: usize) -> String {
    let mut chars: Vec<char> = answer.chars().collect();
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz0123456789路中河".chars().collect();
    for _ in 0..edits {
        let c = alphabet[uniform_index(rng, alphabet.len())];
        match uniform_index(rng, 3) {
            0 if !chars.is_empty() => {
                let i = uniform_index(rng, chars.len());
                chars[i] = c;
            }
            1 if chars.len() > 1 => {
                let i = uniform_index(rng, chars.len());
                chars.remove(i);
            }
            _ => {
                let i = uniform_index(rng, chars.len() + 1);
                chars.insert(i, c);
            }
        }
    }
    let s: String = chars.into_iter().collect();
    if s.trim().is_empty() {
        "x".to_string()
    } else {
        s
    }
}

fn shift(b: &QuadBox, dx: f64, dy: f64) -> QuadBox {
    let v = b.vertices();
    let xs = v.iter().map(|p| p.x);
    let ys = v.iter().map(|p| p.y);
    let (x0, x1) = (xs.clone().fold(f64::MAX, f64::min), xs.fold(f64::MIN, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::MAX, f64::min), ys.fold(f64::MIN, f64::max));
    QuadBox::rect(x0 + dx, y0 + dy, x1 + dx, y1 + dy).expect("shifted box stays positive")
}

/// A CLC bundle with a mix of exact, perturbed and missing answers and of
/// exact, shifted, far and missing evidence. The mono tracks are drawn
/// independently of the bilingual one.
pub fn noisy_bundle(dataset: &Dataset, seed: u64) -> SubmissionBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let make = |rng: &mut ChaCha8Rng, r: &QARecord| -> Option<Prediction> {
        if uniform_index(rng, 10) == 0 {
            return None;
        }
        let answer = match uniform_index(rng, 4) {
            0 => r.answer.clone(),
            1 => perturb(&r.answer, rng, 1),
            2 => {
                let edits = 1 + uniform_index(rng, 4);
                perturb(&r.answer, rng, edits)
            }
            _ => perturb(&r.answer, rng, 8),
        };
        let mut p = Prediction::new(&r.question_id).with_answer(answer);
        match uniform_index(rng, 4) {
            0 => p = p.with_evidence(r.evidence),
            1 => {
                let v = r.evidence.vertices();
                let w = (v[1].x - v[0].x).abs().max(1.0);
                p = p.with_evidence(shift(&r.evidence, w * unit(rng), 0.0));
            }
            2 => p = p.with_evidence(shift(&r.evidence, 500.0, 500.0)),
            _ => {}
        }
        Some(p)
    };
    let bi: Vec<Prediction> = dataset.records().iter().filter_map(|r| make(&mut rng, r)).collect();
    let mut bundle = SubmissionBundle::split_from_bilingual(format!("noisy-{seed}"), dataset, bi);
    for (track, preds) in bundle.tracks.iter_mut() {
        if let Some(lang) = track.language() {
            *preds = dataset
                .records()
                .iter()
                .filter(|r| r.language == lang)
                .filter_map(|r| make(&mut rng, r))
                .collect();
        }
    }
    bundle
}
