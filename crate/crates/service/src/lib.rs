//! HTTP JSON facade over the audit library: dataset upload, infograms, ALFA
//! audits and model training. Long computations run as jobs on the rayon pool
//! and are polled through `/jobs/{id}` and `/results/{id}`.

pub mod api;
pub mod store;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use admissible_core::table::{read_csv, Schema};
use admissible_core::{ColumnKind, Error, Table};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use api::{AlfaRequest, InfogramRequest, ModelRequest, Task};
pub use store::{JobKind, JobRecord, JobState, SessionStore, StoreError};

pub const DEFAULT_PORT: u16 = 7979;
const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("malformed request body: {0}")]
    BadRequest(String),
    #[error("unknown {kind} {id:?}")]
    NotFound { kind: &'static str, id: String },
    #[error("job {0:?} has not finished")]
    NotFinished(String),
    #[error("{0}")]
    Unprocessable(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(e) => ApiError::BadRequest(e.to_string()),
            other => ApiError::Unprocessable(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound { .. } => StatusCode::NOT_FOUND,
            ApiError::NotFinished(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(store: SessionStore) -> Router {
    Router::new()
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/datasets/{id}", get(dataset_summary))
        .route("/datasets/{id}/schema", get(dataset_schema))
        .route("/infogram", post(submit_infogram))
        .route("/alfa", post(submit_alfa))
        .route("/models", post(submit_model))
        .route("/jobs/{id}", get(job_status))
        .route("/results/{id}", get(job_result))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(CorsLayer::permissive())
        .with_state(store)
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    #[serde(default)]
    name: Option<String>,
    /// Comma-separated columns to read as categorical.
    #[serde(default)]
    categorical: Option<String>,
}

async fn upload_dataset(
    State(store): State<SessionStore>,
    Query(query): Query<UploadQuery>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<api::DatasetSummary>)> {
    let schema: Schema = query
        .categorical
        .iter()
        .flat_map(|list| list.split(','))
        .filter(|c| !c.is_empty())
        .map(|c| (c.to_string(), ColumnKind::Categorical))
        .collect();
    let name = query.name.unwrap_or_else(|| "upload".into());
    let parsed = tokio::task::spawn_blocking(move || read_csv(body.as_ref(), &name, &schema))
        .await
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let table = parsed.map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let (id, table) = store.add_dataset(table);
    Ok((StatusCode::CREATED, Json(api::summarize(&id, &table))))
}

async fn list_datasets(State(store): State<SessionStore>) -> Json<Vec<api::DatasetSummary>> {
    let summaries = store
        .dataset_ids()
        .into_iter()
        .filter_map(|id| store.dataset(&id).map(|t| api::summarize(&id, &t)))
        .collect();
    Json(summaries)
}

fn dataset_or_404(store: &SessionStore, id: &str) -> ApiResult<Arc<Table>> {
    store.dataset(id).ok_or_else(|| ApiError::NotFound {
        kind: "dataset",
        id: id.to_string(),
    })
}

async fn dataset_summary(State(store): State<SessionStore>, Path(id): Path<String>) -> ApiResult<Json<api::DatasetSummary>> {
    let table = dataset_or_404(&store, &id)?;
    Ok(Json(api::summarize(&id, &table)))
}

async fn dataset_schema(State(store): State<SessionStore>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let table = dataset_or_404(&store, &id)?;
    let summary = api::summarize(&id, &table);
    Ok(Json(json!({ "id": id, "n_rows": summary.n_rows, "columns": summary.columns })))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

/// Queues `task` on the worker pool and returns the job record immediately.
fn submit(
    store: &SessionStore,
    table: Arc<Table>,
    kind: JobKind,
    dataset: &str,
    task: Task,
) -> (StatusCode, Json<JobRecord>) {
    let job = store.create_job(kind, dataset, task.seed());
    let worker = store.clone();
    let id = job.id.clone();
    rayon::spawn(move || {
        worker.start(&id);
        match catch_unwind(AssertUnwindSafe(|| task.run(&table))) {
            Ok(Ok(result)) => worker.finish(&id, result),
            Ok(Err(e)) => worker.fail(&id, e.to_string()),
            Err(_) => worker.fail(&id, "internal error while running the job".into()),
        }
    });
    (StatusCode::ACCEPTED, Json(job))
}

async fn submit_infogram(State(store): State<SessionStore>, body: Bytes) -> ApiResult<(StatusCode, Json<JobRecord>)> {
    let req: InfogramRequest = parse_body(&body)?;
    let dataset = req.dataset.clone();
    let table = dataset_or_404(&store, &dataset)?;
    let task = req.validate(&table)?;
    Ok(submit(&store, table, JobKind::Infogram, &dataset, task))
}

async fn submit_alfa(State(store): State<SessionStore>, body: Bytes) -> ApiResult<(StatusCode, Json<JobRecord>)> {
    let req: AlfaRequest = parse_body(&body)?;
    let dataset = req.dataset.clone();
    let table = dataset_or_404(&store, &dataset)?;
    let task = req.validate(&table)?;
    Ok(submit(&store, table, JobKind::Alfa, &dataset, task))
}

async fn submit_model(State(store): State<SessionStore>, body: Bytes) -> ApiResult<(StatusCode, Json<JobRecord>)> {
    let req: ModelRequest = parse_body(&body)?;
    let dataset = req.dataset.clone();
    let table = dataset_or_404(&store, &dataset)?;
    let task = req.validate(&table)?;
    Ok(submit(&store, table, JobKind::Model, &dataset, task))
}

fn job_or_404(store: &SessionStore, id: &str) -> ApiResult<JobRecord> {
    store.job(id).ok_or_else(|| ApiError::NotFound {
        kind: "job",
        id: id.to_string(),
    })
}

/// Job metadata without the (possibly large) result.
async fn job_status(State(store): State<SessionStore>, Path(id): Path<String>) -> ApiResult<Json<JobRecord>> {
    let mut job = job_or_404(&store, &id)?;
    job.result = None;
    Ok(Json(job))
}

async fn job_result(State(store): State<SessionStore>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = job_or_404(&store, &id)?;
    match job.state {
        JobState::Queued | JobState::Running => Err(ApiError::NotFinished(id)),
        JobState::Failed => Err(ApiError::Unprocessable(job.error.unwrap_or_default())),
        JobState::Done => Ok(Json(job.result.unwrap_or(Value::Null))),
    }
}

/// Caps the global worker pool at `value` threads when given.
pub fn configure_threads(value: Option<usize>) -> Result<(), String> {
    match value {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => {
            // Fails only if the pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        None => Ok(()),
    }
}
