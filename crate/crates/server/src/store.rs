//! File-backed submission store.
//!
//! Every record lives in its own JSON file, replaced atomically by writing a
//! temporary file and renaming it over the old one. A record only carries a
//! report once its status is `scored`, and both are written in the same
//! rename, so a reader never sees a half-scored entry.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use evqa::{Issue, Task, TaskReport};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const DAY_MS: u64 = 24 * 60 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Received,
    Validating,
    Scoring,
    Scored,
    Rejected,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Scored | Status::Rejected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub id: String,
    pub seq: u64,
    pub model_name: String,
    pub task: Task,
    /// Hash of the submitting token; the token itself is never stored.
    pub token_id: String,
    pub received_at: u64,
    pub updated_at: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TaskReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<Issue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Issue>,
    /// How many times scoring was started, including runs cut short by a
    /// restart.
    #[serde(default)]
    pub attempts: u32,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn token_id(token: &str) -> String {
    let digest = Sha256::digest(token.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("rate limit of {limit} submissions per day reached")]
    RateLimited { limit: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub struct Store {
    root: PathBuf,
    records: RwLock<BTreeMap<String, SubmissionRecord>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        if let Ok(d) = fs::File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

impl Store {
    /// Opens or creates a store. Leftover temporary files from an
    /// interrupted write are removed.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("records"))?;
        fs::create_dir_all(root.join("payloads"))?;
        let mut records = BTreeMap::new();
        for dir in ["records", "payloads"] {
            for entry in fs::read_dir(root.join(dir))? {
                let path = entry?.path();
                let ext = path.extension().and_then(|e| e.to_str());
                if ext == Some("tmp") {
                    fs::remove_file(&path)?;
                } else if dir == "records" && ext == Some("json") {
                    let text = fs::read_to_string(&path)?;
                    match serde_json::from_str::<SubmissionRecord>(&text) {
                        Ok(r) => {
                            records.insert(r.id.clone(), r);
                        }
                        Err(e) => tracing::warn!("ignoring unreadable record {}: {e}", path.display()),
                    }
                }
            }
        }
        Ok(Self {
            root,
            records: RwLock::new(records),
        })
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.root.join("records").join(format!("{id}.json"))
    }

    fn payload_path(&self, id: &str) -> PathBuf {
        self.root.join("payloads").join(format!("{id}.json"))
    }

    fn persist(&self, record: &SubmissionRecord) -> io::Result<()> {
        let bytes = serde_json::to_vec_pretty(record).map_err(io::Error::other)?;
        write_atomic(&self.record_path(&record.id), &bytes)
    }

    /// Stores a new submission unless the token has used up its daily
    /// allowance.
    pub fn create(
        &self,
        model_name: &str,
        task: Task,
        token_id: &str,
        payload: &[u8],
        daily_limit: usize,
    ) -> Result<SubmissionRecord, StoreError> {
        let mut records = self.records.write();
        let now = now_ms();
        let recent = records
            .values()
            .filter(|r| r.token_id == token_id && r.received_at + DAY_MS > now)
            .count();
        if recent >= daily_limit {
            return Err(StoreError::RateLimited { limit: daily_limit });
        }
        let seq = records.values().map(|r| r.seq).max().map_or(1, |s| s + 1);
        let id = format!("sub-{seq:06}");
        let record = SubmissionRecord {
            id: id.clone(),
            seq,
            model_name: model_name.to_string(),
            task,
            token_id: token_id.to_string(),
            received_at: now,
            updated_at: now,
            status: Status::Received,
            report: None,
            errors: Vec::new(),
            warnings: Vec::new(),
            attempts: 0,
        };
        write_atomic(&self.payload_path(&id), payload)?;
        self.persist(&record)?;
        records.insert(id, record.clone());
        Ok(record)
    }

    pub fn payload(&self, id: &str) -> io::Result<Vec<u8>> {
        fs::read(self.payload_path(id))
    }

    /// Applies `change` to a record, persists it, then publishes it to
    /// readers.
    pub fn update(
        &self,
        id: &str,
        change: impl FnOnce(&mut SubmissionRecord),
    ) -> io::Result<SubmissionRecord> {
        let mut records = self.records.write();
        let current = records
            .get(id)
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, format!("no submission {id}")))?;
        let mut next = current.clone();
        change(&mut next);
        next.updated_at = now_ms();
        self.persist(&next)?;
        records.insert(id.to_string(), next.clone());
        Ok(next)
    }

    pub fn get(&self, id: &str) -> Option<SubmissionRecord> {
        self.records.read().get(id).cloned()
    }

    /// Ids of submissions that have not reached a final status, oldest
    /// first.
    pub fn pending(&self) -> Vec<String> {
        let records = self.records.read();
        let mut open: Vec<&SubmissionRecord> = records.values().filter(|r| !r.status.is_terminal()).collect();
        open.sort_by_key(|r| r.seq);
        open.into_iter().map(|r| r.id.clone()).collect()
    }

    /// Scored submissions ordered by task, then Acc descending, then the
    /// earlier submission first.
    pub fn leaderboard(&self, task: Option<Task>) -> Vec<SubmissionRecord> {
        let records = self.records.read();
        let mut scored: Vec<SubmissionRecord> = records
            .values()
            .filter(|r| r.status == Status::Scored && task.is_none_or(|t| t == r.task))
            .filter(|r| r.report.is_some())
            .cloned()
            .collect();
        scored.sort_by(|a, b| {
            let acc = |r: &SubmissionRecord| r.report.as_ref().map_or(0.0, TaskReport::acc);
            a.task
                .code()
                .cmp(b.task.code())
                .then(acc(b).total_cmp(&acc(a)))
                .then(a.received_at.cmp(&b.received_at))
                .then(a.seq.cmp(&b.seq))
        });
        scored
    }

    pub fn len(&self) -> usize {
        self.records.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survives_reopen_and_cleans_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let r = store.create("m", Task::Tc, "t", b"{}", 10).unwrap();
        store.update(&r.id, |r| r.status = Status::Scoring).unwrap();
        fs::write(dir.path().join("records").join("sub-000009.tmp"), b"{\"id\":").unwrap();
        drop(store);
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.pending(), vec![r.id.clone()]);
        assert_eq!(store.payload(&r.id).unwrap(), b"{}");
        assert!(!dir.path().join("records").join("sub-000009.tmp").exists());
    }

    #[test]
    fn rate_limit_per_token() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for _ in 0..2 {
            store.create("m", Task::Tc, "a", b"{}", 2).unwrap();
        }
        assert!(matches!(
            store.create("m", Task::Tc, "a", b"{}", 2),
            Err(StoreError::RateLimited { limit: 2 })
        ));
        store.create("m", Task::Tc, "b", b"{}", 2).unwrap();
    }

    #[test]
    fn token_ids_are_stable_and_opaque() {
        assert_eq!(token_id("secret"), token_id("secret"));
        assert_ne!(token_id("secret"), token_id("other"));
        assert!(!token_id("secret").contains("secret"));
    }
}
