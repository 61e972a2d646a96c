use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use evqa::{NormalizationPolicy, ScoringParams, DEFAULT_TAU, DEFAULT_THETA};
use serde::{Deserialize, Serialize};

use crate::ServerError;

/// Challenge instance settings. Scoring parameters are frozen for the
/// lifetime of the instance so that leaderboard entries stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub ground_truth: PathBuf,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: IpAddr,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub policy: NormalizationPolicy,
    /// API tokens allowed to submit.
    #[serde(default)]
    pub tokens: Vec<String>,
    /// Submissions accepted per token in any 24 hour window.
    #[serde(default = "default_rate_limit")]
    pub submissions_per_day: usize,
    #[serde(default = "default_max_payload")]
    pub max_payload_bytes: usize,
    /// Scoring workers; defaults to the number of CPUs.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("evqa-data")
}

fn default_bind() -> IpAddr {
    IpAddr::V4(Ipv4Addr::LOCALHOST)
}

fn default_port() -> u16 {
    8080
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

fn default_rate_limit() -> usize {
    10
}

fn default_max_payload() -> usize {
    64 * 1024 * 1024
}

fn default_page_size() -> usize {
    20
}

impl ServerConfig {
    pub fn new(ground_truth: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            ground_truth: ground_truth.into(),
            data_dir: data_dir.into(),
            bind: default_bind(),
            port: default_port(),
            tau: DEFAULT_TAU,
            theta: DEFAULT_THETA,
            policy: NormalizationPolicy::default(),
            tokens: Vec::new(),
            submissions_per_day: default_rate_limit(),
            max_payload_bytes: default_max_payload(),
            workers: None,
            page_size: default_page_size(),
        }
    }

    /// Reads a TOML file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut config.ground_truth, &mut config.data_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, ServerError> {
        let config: Self = toml::from_str(text).map_err(|e| ServerError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        self.params()?;
        if self.tokens.iter().any(|t| t.trim().is_empty()) {
            return Err(ServerError::Config("tokens must not be empty strings".into()));
        }
        if self.page_size == 0 {
            return Err(ServerError::Config("page_size must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(ServerError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ScoringParams, ServerError> {
        let params = ScoringParams {
            tau: self.tau,
            theta: self.theta,
            policy: self.policy,
        };
        params.validate().map_err(|e| ServerError::Config(e.to_string()))?;
        Ok(params)
    }

    pub fn worker_count(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
