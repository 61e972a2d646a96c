use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use evqa::ingest::{dataset_to_json, ocr_to_json};
use evqa::synth;
use serde_json::Value;

struct Files {
    dir: tempfile::TempDir,
    gt: PathBuf,
    ocr: PathBuf,
    perfect: PathBuf,
    noisy: PathBuf,
    train: PathBuf,
}

impl Files {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let fixture = synth::fixture(60, 3, 5);
    let train = synth::fixture(120, 1, 6);
    let mut noisy = synth::noisy_bundle(&fixture.dataset, 9);
    for preds in noisy.tracks.values_mut() {
        preds.retain(|p| p.evidence.is_some());
    }
    let write = |name: &str, text: String| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    Files {
        gt: write("gt.json", dataset_to_json(&fixture.dataset)),
        ocr: write("ocr.json", ocr_to_json(&fixture.ocr)),
        perfect: write("perfect.json", synth::perfect_bundle(&fixture.dataset, "echo").to_json()),
        noisy: write("noisy.json", noisy.to_json()),
        train: write("train.json", dataset_to_json(&train.dataset)),
        dir,
    }
}

fn evqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evqa")).args(args).output().expect("run evqa")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).to_string()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_exit_codes() {
    let f = files();
    let o = evqa(&["validate", p(&f.gt)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("0 errors"), "{}", stdout(&o));
    assert_eq!(code(&evqa(&["validate", p(&f.ocr)])), 0);
    assert_eq!(code(&evqa(&["validate", p(&f.perfect), "--gt", p(&f.gt)])), 0);

    let broken = f.path("broken.json");
    std::fs::write(
        &broken,
        r#"{"version":"1.0","questions":[{"question_id":"q1","image_id":"i1","language":"en","question":"what?","answer":"x","evidence":[[0,0],[10,5],[10,0],[0,5]]}]}"#,
    )
    .unwrap();
    let o = evqa(&["validate", p(&broken)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("error"), "{}", stdout(&o));
    let o = evqa(&["--json", "validate", p(&broken)]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["valid"], false);
    assert!(!v["report"]["errors"].as_array().unwrap().is_empty());

    let o = evqa(&[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&evqa(&["validate", p(&f.path("missing.json"))])), 2);
}

#[test]
fn score_formats_and_tasks() {
    let f = files();
    let o = evqa(&["score", "--gt", p(&f.gt), "--pred", p(&f.perfect)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    assert!(table.contains("100.0"), "{table}");
    assert!(!table.lines().skip(2).any(|l| l.contains(" 0.0")), "{table}");

    let v = json(&evqa(&["--json", "score", "--gt", p(&f.gt), "--pred", p(&f.perfect)]));
    for s in ["bi_acc", "bi_en", "bi_zh", "mono_en", "mono_zh"] {
        assert_eq!(v["slices"][s], 100.0, "{s}");
    }
    assert_eq!(v["delta_r"], 1.0);

    let csv = stdout(&evqa(&["score", "--gt", p(&f.gt), "--pred", p(&f.perfect), "--format", "csv"]));
    assert_eq!(csv.lines().next(), Some("task,model,slice,score"));
    assert_eq!(csv.lines().count(), 9, "{csv}");
    assert!(csv.lines().skip(1).all(|l| l.starts_with("clc,echo,")));

    let o = evqa(&["--json", "score", "--gt", p(&f.gt), "--pred", p(&f.perfect), "--task", "tc"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["task"], "tc");
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let quiet = evqa(&["-q", "score", "--gt", p(&f.gt), "--pred", p(&f.perfect), "--task", "tc"]);
    assert!(quiet.stderr.is_empty());

    assert_eq!(code(&evqa(&["score", "--gt", p(&f.gt), "--pred", p(&f.perfect), "--tau", "1.5"])), 2);
    assert_eq!(code(&evqa(&["score", "--gt", p(&f.gt), "--pred", p(&f.ocr)])), 2);
    assert_eq!(code(&evqa(&["score", "--gt", p(&f.gt), "--pred", p(&f.ocr), "--task", "clc"])), 1);
}

#[test]
fn tau_monotone() {
    let f = files();
    let acc = |tau: &str| {
        let o = evqa(&["--json", "score", "--gt", p(&f.gt), "--pred", p(&f.noisy), "--tau", tau]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        json(&o)["slices"]["bi_acc"].as_f64().unwrap()
    };
    let (low, high) = (acc("0.5"), acc("0.95"));
    assert!(high >= low, "{high} < {low}");
    assert!(low < 100.0);
}

#[test]
fn oracles_write_submissions() {
    let f = files();
    let run = |args: &[&str]| {
        let o = evqa(args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        json(&o)
    };
    let (a, b) = (f.path("r1.json"), f.path("r2.json"));
    let r1 = run(&["--json", "oracle", "random", "--gt", p(&f.gt), "--ocr", p(&f.ocr), "--seed", "7", "--out", p(&a)]);
    run(&["--json", "oracle", "random", "--gt", p(&f.gt), "--ocr", p(&f.ocr), "--seed", "7", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(r1["header"]["seed"], "7");

    let ub = f.path("ub.json");
    let u = run(&["--json", "oracle", "ocr-ub", "--gt", p(&f.gt), "--ocr", p(&f.ocr), "--out", p(&ub)]);
    for task in ["tc", "clc"] {
        let (x, y) = (u[task]["slices"]["bi_acc"].as_f64().unwrap(), r1[task]["slices"]["bi_acc"].as_f64().unwrap());
        assert!(x >= y, "{task}: {x} < {y}");
    }
    let rescored = run(&["--json", "score", "--gt", p(&f.gt), "--pred", p(&ub)]);
    assert_eq!(rescored["slices"]["bi_acc"], u["clc"]["slices"]["bi_acc"]);

    let sv = run(&["--json", "oracle", "vocab-ub", "--gt", p(&f.gt), "--train", p(&f.train), "--vocab", "sv", "--out", p(&f.path("sv.json"))]);
    let lv = run(&["--json", "oracle", "vocab-ub", "--gt", p(&f.gt), "--train", p(&f.train), "--vocab", "lv", "--out", p(&f.path("lv.json"))]);
    assert!(lv["tc"]["slices"]["bi_acc"].as_f64() >= sv["tc"]["slices"]["bi_acc"].as_f64());

    let o = evqa(&["oracle", "random", "--gt", p(&f.gt), "--ocr", p(&f.path("nope.json")), "--out", p(&a)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn attach_evidence_fills_boxes() {
    let f = files();
    let text = std::fs::read_to_string(&f.perfect).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    for preds in v["tracks"].as_object_mut().unwrap().values_mut() {
        for pred in preds.as_array_mut().unwrap() {
            pred.as_object_mut().unwrap().remove("evidence");
        }
    }
    v["task"] = "tc".into();
    let answers = f.path("answers.json");
    std::fs::write(&answers, v.to_string()).unwrap();
    let out = f.path("attached.json");
    let o = evqa(&["--json", "oracle", "attach-evidence", "--gt", p(&f.gt), "--pred", p(&answers), "--ocr", p(&f.ocr), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let attached: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let bi = attached["tracks"]["bi"].as_array().unwrap();
    assert!(bi.iter().all(|p| p["evidence"].is_array()));
}

#[test]
fn sweep_rows() {
    let f = files();
    let o = evqa(&["sweep", "--gt", p(&f.gt), "--pred", p(&f.noisy), "--param", "tau", "--steps", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(csv.lines().next(), Some("parameter,slice,score"));
    assert_eq!(rows.len(), 10);
    let scores: Vec<f64> = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{scores:?}");

    let o = evqa(&["sweep", "--gt", p(&f.gt), "--pred", p(&f.noisy), "--param", "theta", "--grid", "0.2,0.4", "--slices", "bi_en,bi_zh"]);
    assert_eq!(stdout(&o).lines().count(), 5);
    let v = json(&evqa(&["--json", "sweep", "--gt", p(&f.gt), "--pred", p(&f.noisy), "--steps", "3"]));
    assert_eq!(v["points"].as_array().unwrap().len(), 3);

    assert_eq!(code(&evqa(&["sweep", "--gt", p(&f.gt), "--pred", p(&f.noisy), "--grid", "0.5,0.2"])), 2);
    assert_eq!(code(&evqa(&["sweep", "--gt", p(&f.gt), "--pred", p(&f.noisy), "--steps", "0"])), 2);
}

#[test]
fn stats_counts() {
    let dir = tempfile::tempdir().unwrap();
    let q = |id: &str, img: &str, lang: &str, question: &str, answer: &str| {
        format!(
            r#"{{"question_id":"{id}","image_id":"{img}","language":"{lang}","question":"{question}","answer":"{answer}","evidence":[[0,0],[10,0],[10,5],[0,5]]}}"#
        )
    };
    let gt = dir.path().join("gt.json");
    let items = [
        q("e1", "a", "en", "What is the name of the shop?", "coca cola"),
        q("e2", "a", "en", "What is written on the sign?", "exit"),
        q("c1", "b", "zh", "店名 是 什么", "可口可乐"),
        q("c2", "c", "zh", "牌子 上 写 的 是 什么", "出口"),
    ];
    std::fs::write(&gt, format!(r#"{{"version":"1.0","questions":[{}]}}"#, items.join(","))).unwrap();
    let v = json(&evqa(&["--json", "stats", "--gt", p(&gt)]));
    assert_eq!(v["languages"]["en"]["questions"], 2);
    assert_eq!(v["languages"]["en"]["images"], 1);
    assert_eq!(v["languages"]["zh"]["questions"], 2);
    assert_eq!(v["languages"]["zh"]["images"], 2);
    assert_eq!(v["languages"]["en"]["prefixes"]["children"]["what"]["count"], 2);
    let text = stdout(&evqa(&["stats", "--gt", p(&gt)]));
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["total", "3", "4"]), "{text}");
}

fn http(addr: SocketAddr, method: &str, path: &str, headers: &str, body: &[u8]) -> Value {
    let mut s = TcpStream::connect(addr).unwrap();
    let head = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Length: {}\r\n{headers}\r\n", body.len());
    s.write_all(head.as_bytes()).unwrap();
    s.write_all(body).unwrap();
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).unwrap();
    let text = String::from_utf8_lossy(&buf).to_string();
    let body = text.split_once("\r\n\r\n").map_or("", |(_, b)| b);
    serde_json::from_str(body).unwrap_or(Value::Null)
}

struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_scores_a_perfect_submission() {
    let f = files();
    let config = f.path("server.toml");
    std::fs::write(
        &config,
        format!("ground_truth = {:?}\ndata_dir = {:?}\nport = 0\ntokens = [\"t0k\"]\nworkers = 1\n", p(&f.gt), p(&f.path("data"))),
    )
    .unwrap();
    let mut child = Child(
        Command::new(env!("CARGO_BIN_EXE_evqa"))
            .args(["-q", "serve"])
            .env("EVQA_CONFIG", &config)
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut line = String::new();
    BufReader::new(child.0.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr: SocketAddr = line.trim().strip_prefix("listening on ").expect(&line).parse().unwrap();

    let boundary = "b0undary";
    let mut body = Vec::new();
    for (name, value) in [("task", "clc"), ("model_name", "echo")] {
        body.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes());
    }
    body.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"s.json\"\r\n\r\n").as_bytes());
    body.extend_from_slice(&std::fs::read(&f.perfect).unwrap());
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    let headers = format!("Authorization: Bearer t0k\r\nContent-Type: multipart/form-data; boundary={boundary}\r\n");
    let r = http(addr, "POST", "/api/v1/submissions", &headers, &body);
    assert!(r["submission_id"].is_string(), "{r}");

    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let board = http(addr, "GET", "/api/v1/leaderboard?task=clc", "", b"");
        if let Some(e) = board["entries"].as_array().and_then(|e| e.first()) {
            assert_eq!(e["acc"], 100.0);
            assert_eq!(e["model_name"], "echo");
            break;
        }
        assert!(Instant::now() < deadline, "never scored");
        std::thread::sleep(Duration::from_millis(50));
    }
}
