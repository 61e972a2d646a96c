//! HTTP submission server for evqa challenges.
//!
//! Submissions are uploaded as multipart forms, stored on disk, validated
//! strictly against the ground truth and scored by a bounded pool of
//! workers. Submissions that were still in flight when the process stopped
//! are picked up again on the next start.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use evqa::{load_dataset, ValidationMode};
use tokio::net::TcpListener;

pub mod api;
pub mod config;
pub mod store;
pub mod worker;

pub use api::{LeaderboardEntry, LeaderboardPage, SubmissionView};
pub use config::ServerConfig;
pub use store::{Status, Store, SubmissionRecord};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ground truth: {0}")]
    GroundTruth(#[from] evqa::Error),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A bound, ready-to-run server.
pub struct Server {
    listener: TcpListener,
    state: Arc<api::AppState>,
}

impl Server {
    /// Loads the ground truth, opens the store, requeues unfinished
    /// submissions and binds the listening socket. Port 0 picks a free port.
    pub async fn bind(config: ServerConfig) -> Result<Self, ServerError> {
        config.validate()?;
        let params = config.params()?;
        let (dataset, _) = load_dataset(&config.ground_truth, ValidationMode::Strict)?;
        let store = Arc::new(Store::open(&config.data_dir).map_err(|source| ServerError::Io {
            path: config.data_dir.clone(),
            source,
        })?);
        let workers = config.worker_count();
        let scorer = Arc::new(worker::Scorer {
            store: Arc::clone(&store),
            dataset: Arc::new(dataset),
            params,
        });
        let queue = worker::start(scorer, workers);
        let pending = store.pending();
        if !pending.is_empty() {
            tracing::info!("requeueing {} unfinished submissions", pending.len());
        }
        for id in pending {
            queue.push(id);
        }
        let addr = SocketAddr::new(config.bind, config.port);
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServerError::Io {
                path: PathBuf::from(addr.to_string()),
                source,
            })?;
        let state = Arc::new(api::AppState {
            store,
            queue,
            tokens: config.tokens.clone(),
            submissions_per_day: config.submissions_per_day,
            max_payload_bytes: config.max_payload_bytes,
            page_size: config.page_size,
            workers,
        });
        Ok(Self { listener, state })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then lets in-flight scoring finish.
    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        let queue = self.state.queue.clone();
        axum::serve(self.listener, api::router(self.state))
            .with_graceful_shutdown(shutdown)
            .await?;
        queue.drain().await;
        Ok(())
    }

    /// Serves until Ctrl-C.
    pub async fn run(self) -> std::io::Result<()> {
        self.run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    }
}
