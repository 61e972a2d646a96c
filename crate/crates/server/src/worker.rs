use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use evqa::ingest::parse_submission;
use evqa::{score, Dataset, Error, Issue, ScoringParams, ValidationMode};
use tokio::sync::{mpsc, Mutex, Semaphore};

use crate::store::{Status, Store};

/// Everything a worker needs to score a submission.
pub struct Scorer {
    pub store: Arc<Store>,
    pub dataset: Arc<Dataset>,
    pub params: ScoringParams,
}

fn issue(rule: &str, message: impl Into<String>) -> Issue {
    Issue {
        locator: "submission".into(),
        rule: rule.into(),
        message: message.into(),
    }
}

impl Scorer {
    /// Runs one submission through validation and scoring. The final status
    /// and report are persisted in a single write.
    pub fn process(&self, id: &str) -> std::io::Result<()> {
        let Some(record) = self.store.get(id) else { return Ok(()) };
        if record.status.is_terminal() {
            return Ok(());
        }
        self.store.update(id, |r| {
            r.status = Status::Validating;
            r.attempts += 1;
        })?;
        let reject = |errors: Vec<Issue>, warnings: Vec<Issue>| {
            self.store.update(id, |r| {
                r.status = Status::Rejected;
                r.errors = errors;
                r.warnings = warnings;
            })
        };
        let payload = self.store.payload(id)?;
        let Ok(text) = String::from_utf8(payload) else {
            reject(vec![issue("encoding", "submission file is not UTF-8")], Vec::new())?;
            return Ok(());
        };
        let (bundle, report) =
            match parse_submission(&text, Some(&self.dataset), record.task, ValidationMode::Strict) {
                Ok(ok) => ok,
                Err(Error::Invalid(report)) => {
                    reject(report.errors, report.warnings)?;
                    return Ok(());
                }
                Err(e) => {
                    reject(vec![issue("parse", e.to_string())], Vec::new())?;
                    return Ok(());
                }
            };
        self.store.update(id, |r| {
            r.status = Status::Scoring;
            r.warnings = report.warnings.clone();
        })?;
        match score(record.task, &self.dataset, &bundle, &self.params) {
            Ok(mut task_report) => {
                task_report.model = record.model_name.clone();
                self.store.update(id, |r| {
                    r.status = Status::Scored;
                    r.report = Some(task_report);
                })?;
            }
            Err(e) => {
                reject(vec![issue("scoring", e.to_string())], report.warnings)?;
            }
        }
        Ok(())
    }
}

/// Durable queue front end. The store is the source of truth; the channel
/// only wakes workers.
#[derive(Clone)]
pub struct Queue {
    tx: mpsc::UnboundedSender<String>,
    slots: Arc<Semaphore>,
    workers: u32,
    closed: Arc<AtomicBool>,
}

impl Queue {
    pub fn push(&self, id: String) {
        let _ = self.tx.send(id);
    }

    /// Stops picking up new submissions and waits for running ones to
    /// finish. Unstarted submissions stay on disk for the next start.
    pub async fn drain(&self) {
        self.closed.store(true, Ordering::SeqCst);
        let _ = self.slots.acquire_many(self.workers).await;
    }
}

/// Starts `workers` scoring tasks. Each submission is handled by exactly one
/// worker.
pub fn start(scorer: Arc<Scorer>, workers: usize) -> Queue {
    let workers = workers.max(1);
    let (tx, rx) = mpsc::unbounded_channel::<String>();
    let rx = Arc::new(Mutex::new(rx));
    let queue = Queue {
        tx,
        slots: Arc::new(Semaphore::new(workers)),
        workers: workers as u32,
        closed: Arc::new(AtomicBool::new(false)),
    };
    for _ in 0..workers {
        let rx = Arc::clone(&rx);
        let scorer = Arc::clone(&scorer);
        let queue = queue.clone();
        tokio::spawn(async move {
            loop {
                let next = rx.lock().await.recv().await;
                let Some(id) = next else { break };
                let Ok(permit) = Arc::clone(&queue.slots).acquire_owned().await else { break };
                if queue.closed.load(Ordering::SeqCst) {
                    break;
                }
                let s = Arc::clone(&scorer);
                let job = tokio::task::spawn_blocking(move || {
                    if let Err(e) = s.process(&id) {
                        tracing::error!("submission {id}: {e}");
                    }
                });
                if let Err(e) = job.await {
                    tracing::error!("scoring task failed: {e}");
                }
                drop(permit);
            }
        });
    }
    queue
}
