use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evqa::{Issue, Slice, Task, TaskReport};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{token_id, Status, Store, StoreError, SubmissionRecord};
use crate::worker::Queue;

pub struct AppState {
    pub store: Arc<Store>,
    pub queue: Queue,
    pub tokens: Vec<String>,
    pub submissions_per_day: usize,
    pub max_payload_bytes: usize,
    pub page_size: usize,
    pub workers: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal() -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal server error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message, "details": self.details});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Public view of a submission.
#[derive(Debug, Serialize, Deserialize)]
pub struct SubmissionView {
    pub submission_id: String,
    pub model_name: String,
    pub task: Task,
    pub status: Status,
    pub received_at: u64,
    pub updated_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TaskReport>,
    #[serde(default)]
    pub errors: Vec<Issue>,
    #[serde(default)]
    pub warnings: Vec<Issue>,
}

impl From<SubmissionRecord> for SubmissionView {
    fn from(r: SubmissionRecord) -> Self {
        Self {
            submission_id: r.id,
            model_name: r.model_name,
            task: r.task,
            status: r.status,
            received_at: r.received_at,
            updated_at: r.updated_at,
            report: r.report,
            errors: r.errors,
            warnings: r.warnings,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub submission_id: String,
    pub model_name: String,
    pub task: Task,
    pub acc: f64,
    pub slices: BTreeMap<Slice, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_r: Option<f64>,
    pub received_at: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LeaderboardPage {
    pub task: Option<Task>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub entries: Vec<LeaderboardEntry>,
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.max_payload_bytes + 64 * 1024;
    Router::new()
        .route("/api/v1/submissions", post(submit))
        .route("/api/v1/submissions/{id}", get(submission))
        .route("/api/v1/leaderboard", get(leaderboard))
        .route("/api/v1/health", get(health))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(axum::http::header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", "submission file is too large")
    } else {
        ApiError::bad_request(format!("malformed multipart body: {}", e.body_text()))
    }
}

async fn submit(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    mut multipart: Multipart,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let token = bearer(&headers)
        .filter(|t| state.tokens.iter().any(|k| k == t))
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or unknown API token"))?
        .to_string();
    let (mut file, mut task, mut model_name) = (None, None, None);
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        match field.name() {
            Some("file") => {
                let bytes = field.bytes().await.map_err(multipart_error)?;
                if bytes.len() > state.max_payload_bytes {
                    return Err(ApiError::new(
                        StatusCode::PAYLOAD_TOO_LARGE,
                        "payload_too_large",
                        "submission file is too large",
                    ));
                }
                file = Some(bytes);
            }
            Some("task") => task = Some(field.text().await.map_err(multipart_error)?),
            Some("model_name") => model_name = Some(field.text().await.map_err(multipart_error)?),
            _ => {}
        }
    }
    let file = file.ok_or_else(|| ApiError::bad_request("missing multipart field \"file\""))?;
    let task: Task = task
        .ok_or_else(|| ApiError::bad_request("missing multipart field \"task\""))?
        .trim()
        .parse()
        .map_err(|e: evqa::Error| ApiError::bad_request(e.to_string()))?;
    let model_name = model_name
        .map(|m| m.trim().to_string())
        .filter(|m| !m.is_empty())
        .ok_or_else(|| ApiError::bad_request("missing multipart field \"model_name\""))?;
    let store = Arc::clone(&state.store);
    let limit = state.submissions_per_day;
    let tid = token_id(&token);
    let created = tokio::task::spawn_blocking(move || store.create(&model_name, task, &tid, &file, limit))
        .await
        .map_err(|_| ApiError::internal())?;
    let record = match created {
        Ok(r) => r,
        Err(StoreError::RateLimited { limit }) => {
            let mut e = ApiError::new(StatusCode::TOO_MANY_REQUESTS, "rate_limited", format!("at most {limit} submissions per day"));
            e.details = json!({"limit": limit});
            return Err(e);
        }
        Err(StoreError::Io(e)) => {
            tracing::error!("storing submission: {e}");
            return Err(ApiError::internal());
        }
    };
    state.queue.push(record.id.clone());
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"submission_id": record.id, "status": record.status})),
    ))
}

async fn submission(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SubmissionView>> {
    state
        .store
        .get(&id)
        .map(|r| Json(r.into()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no submission {id:?}")))
}

#[derive(Debug, Deserialize)]
struct LeaderboardQuery {
    task: Option<String>,
    page: Option<usize>,
}

async fn leaderboard(
    State(state): State<Arc<AppState>>,
    Query(q): Query<LeaderboardQuery>,
) -> ApiResult<Json<LeaderboardPage>> {
    let task = q
        .task
        .map(|t| t.parse::<Task>())
        .transpose()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let page = q.page.unwrap_or(1);
    if page == 0 {
        return Err(ApiError::bad_request("page numbers start at 1"));
    }
    let all = state.store.leaderboard(task);
    let mut rank = 0;
    let mut last_task = None;
    let ranked: Vec<LeaderboardEntry> = all
        .into_iter()
        .filter_map(|r| {
            if last_task != Some(r.task) {
                last_task = Some(r.task);
                rank = 0;
            }
            rank += 1;
            let report = r.report?;
            Some(LeaderboardEntry {
                rank,
                submission_id: r.id,
                model_name: r.model_name,
                task: r.task,
                acc: report.acc(),
                slices: report.slices,
                delta_r: report.delta_r,
                received_at: r.received_at,
            })
        })
        .collect();
    let total = ranked.len();
    let entries = ranked
        .into_iter()
        .skip((page - 1) * state.page_size)
        .take(state.page_size)
        .collect();
    Ok(Json(LeaderboardPage {
        task,
        page,
        page_size: state.page_size,
        total,
        entries,
    }))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "submissions": state.store.len(),
        "pending": state.store.pending().len(),
        "workers": state.workers,
    }))
}
