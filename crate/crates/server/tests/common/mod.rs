#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::time::{Duration, Instant};

use evqa::ingest::dataset_to_json;
use evqa::synth::Fixture;
use evqa_server::ServerConfig;
use serde_json::Value;

pub const TOKEN: &str = "team-token";
pub const OTHER_TOKEN: &str = "other-token";

pub struct Response {
    pub status: u16,
    pub body: Value,
    pub raw: String,
}

fn dechunk(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(pos) = rest.windows(2).position(|w| w == b"\r\n") {
        let size = usize::from_str_radix(std::str::from_utf8(&rest[..pos]).unwrap_or("0").trim(), 16).unwrap_or(0);
        if size == 0 {
            break;
        }
        let start = pos + 2;
        out.extend_from_slice(&rest[start..start + size]);
        rest = &rest[start + size + 2..];
    }
    out
}

/// Minimal HTTP/1.1 client: one request per connection.
pub fn request(addr: SocketAddr, method: &str, path: &str, headers: &[(&str, String)], body: &[u8]) -> Response {
    let mut stream = TcpStream::connect(addr).expect("connect");
    stream.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
    let mut head = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Length: {}\r\n", body.len());
    for (k, v) in headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str("\r\n");
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(body).unwrap();
    let mut buf = Vec::new();
    stream.read_to_end(&mut buf).unwrap();
    let split = buf.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
    let head = String::from_utf8_lossy(&buf[..split]).to_string();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let mut payload = buf[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        payload = dechunk(&payload);
    }
    let raw = String::from_utf8_lossy(&payload).to_string();
    let body = serde_json::from_str(&raw).unwrap_or(Value::Null);
    Response { status, body, raw }
}

pub fn get(addr: SocketAddr, path: &str) -> Response {
    request(addr, "GET", path, &[], b"")
}

pub fn submit(addr: SocketAddr, token: Option<&str>, task: &str, model: &str, file: &[u8]) -> Response {
    let boundary = "evqa-test-boundary-7MA4YWxkTrZu0gW";
    let mut body = Vec::new();
    for (name, value) in [("task", task.as_bytes()), ("model_name", model.as_bytes())] {
        body.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes());
        body.extend_from_slice(value);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(
        format!("--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"submission.json\"\r\nContent-Type: application/json\r\n\r\n")
            .as_bytes(),
    );
    body.extend_from_slice(file);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    let mut headers = vec![("Content-Type", format!("multipart/form-data; boundary={boundary}"))];
    if let Some(t) = token {
        headers.push(("Authorization", format!("Bearer {t}")));
    }
    request(addr, "POST", "/api/v1/submissions", &headers, &body)
}

pub fn wait_for_status(addr: SocketAddr, id: &str, timeout: Duration) -> Value {
    let start = Instant::now();
    loop {
        let r = get(addr, &format!("/api/v1/submissions/{id}"));
        let status = r.body["status"].as_str().unwrap_or_default().to_string();
        if status == "scored" || status == "rejected" {
            return r.body;
        }
        assert!(start.elapsed() < timeout, "submission {id} stuck in {status:?}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

/// Writes the fixture's ground truth and a server config into `dir`.
pub fn write_config(dir: &Path, fixture: &Fixture) -> ServerConfig {
    let gt = dir.join("gt.json");
    std::fs::write(&gt, dataset_to_json(&fixture.dataset)).unwrap();
    let mut config = ServerConfig::new(gt, dir.join("data"));
    config.port = 0;
    config.tokens = vec![TOKEN.into(), OTHER_TOKEN.into()];
    config.workers = Some(2);
    config
}
