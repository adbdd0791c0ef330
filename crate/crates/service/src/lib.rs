//! HTTP front end over a [`TrendStore`]: corpus listing, series queries,
//! document drill-down and CSV export. Handlers are thin; all computation
//! goes through the same pipeline the command line uses.

mod config;
mod error;

use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, Request, State};
use axum::http::header;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use trends_core::query::{self, QueryParams, QueryResult};
use trends_core::store::DocumentPage;
use trends_core::{NGram, TrendStore};

pub use config::{parse_listen, ServiceConfig, DEFAULT_LISTEN};
pub use error::ApiError;

pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 200;

#[derive(Clone)]
pub struct AppState {
    store: Arc<TrendStore>,
    requests: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(store: TrendStore) -> Self {
        AppState {
            store: Arc::new(store),
            requests: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn store(&self) -> &TrendStore {
        &self.store
    }

    /// Requests handled since startup.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDescriptor {
    pub id: String,
    pub title: String,
    pub resolution: String,
    pub n_max: usize,
    pub documents: usize,
    pub timeline: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default)]
pub struct DocumentParams {
    pub corpus: String,
    pub q: String,
    pub bucket: String,
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/corpora", get(corpora))
        .route("/api/series", get(series))
        .route("/api/documents", get(documents))
        .route("/api/export.csv", get(export_csv))
        .layer(middleware::from_fn_with_state(state.clone(), log_requests))
        .with_state(state)
}

/// Bind and serve until `shutdown` resolves; in-flight requests finish first.
pub async fn serve<F>(state: AppState, listener: TcpListener, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    tracing::info!(addr = %listener.local_addr()?, corpora = state.store.corpora().count(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn log_requests(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let started = Instant::now();
    let id = state.requests.fetch_add(1, Ordering::Relaxed) + 1;
    let method = req.method().clone();
    let uri = req.uri().clone();
    let response = next.run(req).await;
    tracing::info!(
        request = id,
        method = %method,
        uri = %uri,
        status = response.status().as_u16(),
        micros = started.elapsed().as_micros() as u64,
        "request"
    );
    response
}

pub fn describe(store: &TrendStore) -> Vec<CorpusDescriptor> {
    store
        .corpora()
        .map(|s| {
            let c = s.config();
            CorpusDescriptor {
                id: c.corpus_id.clone(),
                title: c.title.clone(),
                resolution: c.resolution.as_str().to_owned(),
                n_max: c.n_max,
                documents: s.document_count(),
                timeline: s.timeline(),
            }
        })
        .collect()
}

async fn corpora(State(state): State<AppState>) -> Json<Vec<CorpusDescriptor>> {
    Json(describe(&state.store))
}

/// Parse and run a series query off the async runtime.
pub async fn run_query(state: &AppState, params: QueryParams) -> Result<QueryResult, ApiError> {
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || -> Result<QueryResult, ApiError> {
        let snapshot = store.open_snapshot(params.corpus.trim())?;
        let q = query::parse_query_for(&params, &snapshot)?;
        Ok(query::execute(&q, &snapshot)?)
    })
    .await
    .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn params<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(p)| p)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn series(
    State(state): State<AppState>,
    q: Result<Query<QueryParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let result = run_query(&state, params(q)?).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], query::to_json(&result)).into_response())
}

async fn export_csv(
    State(state): State<AppState>,
    q: Result<Query<QueryParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let result = run_query(&state, params(q)?).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"trends.csv\""),
        ],
        query::to_csv(&result),
    )
        .into_response())
}

async fn documents(
    State(state): State<AppState>,
    q: Result<Query<DocumentParams>, QueryRejection>,
) -> Result<Json<DocumentPage>, ApiError> {
    let p = params(q)?;
    let snapshot = state.store.open_snapshot(p.corpus.trim())?;
    let config = snapshot.config();
    let ngram = NGram::parse(&p.q, config)?;
    if p.bucket.trim().is_empty() {
        return Err(ApiError::bad_request("bucket is required"));
    }
    let bucket = config.resolve_bucket(&p.bucket)?;
    let page_size = p.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page_size must be within 1..={MAX_PAGE_SIZE}"
        )));
    }
    Ok(Json(snapshot.list_documents(&ngram, bucket, p.page.unwrap_or(0), page_size)?))
}
