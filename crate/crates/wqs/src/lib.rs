//! Web Query Service: query text over HTTP, answered with the payload its
//! delivery format selects, plus JSON catalog documents.

mod docs;
mod error;
mod ops;

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::extract::{DefaultBodyLimit, Path as UrlPath, RawQuery, State};
use axum::http::{header, HeaderMap};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use geosensor_core::catalog::{fingerprint, CatalogError, Database};
use geosensor_core::codecs::EncodedPayload;
use tokio::net::TcpListener;

pub use docs::{capabilities, describe_coverage, describe_platform, describe_sensor};
pub use error::ApiError;
pub use ops::{
    bbox_window, get_coverage, get_observation, get_observation_csv, handle_query, observation_sql, Bbox,
    ObservationFilter,
};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_QUERY_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub max_query_bytes: usize,
    /// Artificial pause before each query runs; for shutdown testing.
    pub query_delay: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { max_query_bytes: DEFAULT_MAX_QUERY_BYTES, query_delay: Duration::ZERO }
    }
}

struct Snapshot {
    fingerprint: u64,
    db: Arc<Database>,
}

struct Inner {
    root: Option<PathBuf>,
    config: ServiceConfig,
    snapshot: Mutex<Snapshot>,
}

/// Shared service state. A catalog opened from disk is reopened whenever its
/// files change, so data loaded while serving becomes visible.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn open(root: &Path, config: ServiceConfig) -> Result<Self, CatalogError> {
        let fp = fingerprint(root);
        let db = Database::open(root)?;
        Ok(AppState(Arc::new(Inner {
            root: Some(root.to_path_buf()),
            config,
            snapshot: Mutex::new(Snapshot { fingerprint: fp, db: Arc::new(db) }),
        })))
    }

    pub fn from_database(db: Database, config: ServiceConfig) -> Self {
        AppState(Arc::new(Inner {
            root: None,
            config,
            snapshot: Mutex::new(Snapshot { fingerprint: 0, db: Arc::new(db) }),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    /// The current catalog snapshot.
    pub fn database(&self) -> Result<Arc<Database>, ApiError> {
        let mut snap = self.0.snapshot.lock().expect("snapshot lock");
        if let Some(root) = &self.0.root {
            let fp = fingerprint(root);
            if fp != snap.fingerprint {
                let db = Database::open(root).map_err(|e| ApiError::internal(format!("reloading catalog: {e}")))?;
                tracing::info!(root = %root.display(), "catalog changed, reloaded");
                *snap = Snapshot { fingerprint: fp, db: Arc::new(db) };
            }
        }
        Ok(snap.db.clone())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/wqs", get(query_get).post(query_post))
        .route("/capabilities", get(get_capabilities))
        .route("/coverages/{name}", get(get_coverage_doc))
        .route("/coverages/{name}/data", get(get_coverage_data))
        .route("/observations/{table}", get(get_observations))
        .route("/sensors/{id}", get(get_sensor))
        .route("/platforms/{id}", get(get_platform))
        .fallback(|| async { ApiError::not_found("not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "wqs listening");
    }
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn blocking<T: Send + 'static>(
    state: AppState,
    f: impl FnOnce(&Database) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(move || f(&*state.database()?))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn payload(p: EncodedPayload) -> Response {
    ([(header::CONTENT_TYPE, p.media_type.as_str())], p.bytes).into_response()
}

fn params(raw: Option<&str>) -> Vec<(String, String)> {
    raw.map(|q| form_urlencoded::parse(q.as_bytes()).into_owned().collect()).unwrap_or_default()
}

async fn run_query(state: AppState, q: Option<String>) -> Result<Response, ApiError> {
    let limit = state.config().max_query_bytes;
    let q = q.ok_or_else(|| ApiError::bad_request("missing_query", "parameter q is required"))?;
    if q.len() > limit {
        return Err(ApiError::too_large(limit));
    }
    let delay = state.config().query_delay;
    let started = Instant::now();
    let result = blocking(state, move |db| {
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        handle_query(db, &q)
    })
    .await;
    match &result {
        Ok(p) => tracing::info!(media = %p.media_type, bytes = p.bytes.len(), elapsed = ?started.elapsed(), "query"),
        Err(e) => tracing::info!(error = %e, elapsed = ?started.elapsed(), "query failed"),
    }
    result.map(payload)
}

async fn query_get(State(state): State<AppState>, RawQuery(raw): RawQuery) -> Result<Response, ApiError> {
    let q = params(raw.as_deref()).into_iter().find(|(k, _)| k == "q").map(|(_, v)| v);
    run_query(state, q).await
}

async fn query_post(State(state): State<AppState>, headers: HeaderMap, body: Body) -> Result<Response, ApiError> {
    let limit = state.config().max_query_bytes;
    // percent-encoding can triple the size of the text
    let bytes = to_bytes(body, limit.saturating_mul(3).saturating_add(2)).await.map_err(|_| ApiError::too_large(limit))?;
    let form = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/x-www-form-urlencoded"));
    let q = if form || bytes.starts_with(b"q=") {
        form_urlencoded::parse(&bytes).into_owned().find(|(k, _)| k == "q").map(|(_, v)| v)
    } else if bytes.is_empty() {
        None
    } else {
        Some(String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::bad_request("bad_encoding", "body is not UTF-8"))?)
    };
    run_query(state, q).await
}

async fn get_capabilities(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    blocking(state, capabilities).await.map(Json)
}

async fn get_coverage_doc(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    blocking(state, move |db| describe_coverage(db, &name)).await.map(Json)
}

async fn get_coverage_data(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    RawQuery(raw): RawQuery,
) -> Result<Response, ApiError> {
    let p: HashMap<String, String> = params(raw.as_deref()).into_iter().collect();
    if let Some(k) = p.keys().find(|k| !matches!(k.as_str(), "band" | "bbox")) {
        return Err(ApiError::bad_request("bad_parameter", format!("unknown parameter {k:?}")));
    }
    let band = match p.get("band") {
        None => 1,
        Some(b) => b.parse().map_err(|_| ApiError::bad_request("bad_parameter", format!("band {b:?} is not an index")))?,
    };
    let bbox = p.get("bbox").map(|b| b.parse::<Bbox>()).transpose()?;
    blocking(state, move |db| get_coverage(db, &name, band, bbox.as_ref())).await.map(payload)
}

async fn get_observations(
    State(state): State<AppState>,
    UrlPath(table): UrlPath<String>,
    RawQuery(raw): RawQuery,
) -> Result<Response, ApiError> {
    let p = params(raw.as_deref());
    let filter = ObservationFilter::from_params(p.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    blocking(state, move |db| get_observation_csv(db, &table, &filter)).await.map(payload)
}

async fn get_sensor(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<serde_json::Value>, ApiError> {
    blocking(state, move |db| describe_sensor(db, &id)).await.map(Json)
}

async fn get_platform(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    blocking(state, move |db| describe_platform(db, &id)).await.map(Json)
}
