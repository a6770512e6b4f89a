//! Identification service: rank expert documents for free-text descriptions
//! over HTTP with JSON bodies.
//!
//! | method | path | body |
//! |---|---|---|
//! | `POST` | `/api/identify` | [`IdentifyRequest`] → [`IdentifyResponse`] |
//! | `GET` | `/api/documents` | `[{doc_id, class_name}]` |
//! | `GET` | `/api/documents/{doc_id}` | `{doc_id, class_name, sentences}` |
//! | `GET` | `/api/health` | `{status, corpus_id, K, mode}` |
//!
//! The model lives in an immutable [`Snapshot`]; reloading swaps the whole
//! snapshot, so each request sees exactly one model.

mod snapshot;

use std::fs::File;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fieldguide_core::Error;
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;

pub use snapshot::{
    EvidenceItem, IdentifyRequest, IdentifyResponse, Limits, Mode, ModelInfo, ResultItem, Snapshot, SnapshotConfig, EVIDENCE_PER_RESULT,
};

/// Shared service state: the current snapshot (absent while loading) and an
/// optional session log.
#[derive(Default)]
pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    session_log: Option<Mutex<File>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append each identify exchange (captions, mode, ranked ids; no client
    /// information) to `path`.
    pub fn with_session_log(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            snapshot: RwLock::default(),
            session_log: Some(Mutex::new(file)),
        })
    }

    /// Atomically replace the served model.
    pub fn install(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Some(Arc::new(snapshot));
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn log_session(&self, req: &IdentifyRequest, resp: &IdentifyResponse) {
        let Some(log) = &self.session_log else { return };
        let line = json!({
            "captions": req.captions,
            "mode": resp.model_info.mode,
            "ranking": resp.results.iter().map(|r| &r.doc_id).collect::<Vec<_>>(),
        });
        let mut f = log.lock().expect("session log lock poisoned");
        if let Err(e) = writeln!(f, "{line}") {
            log::warn!("session log write failed: {e}");
        }
    }
}

/// A JSON error body with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn loading() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "model is not loaded yet")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::DimMismatch { .. } | Error::Config(_) => StatusCode::BAD_REQUEST,
            Error::Unknown { .. } => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    corpus_id: Option<String>,
    #[serde(rename = "K")]
    k: Option<usize>,
    mode: Option<Mode>,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(match state.current() {
        Some(s) => Health {
            status: "ready",
            corpus_id: Some(s.corpus_id().to_owned()),
            k: Some(s.corpus().len()),
            mode: Some(s.default_mode()),
        },
        None => Health {
            status: "loading",
            corpus_id: None,
            k: None,
            mode: None,
        },
    })
}

async fn identify(State(state): State<Arc<AppState>>, body: axum::body::Bytes) -> Result<Json<IdentifyResponse>, ApiError> {
    let snap = state.current().ok_or_else(ApiError::loading)?;
    let req: IdentifyRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid request: {e}")))?;
    let (req, resp) = tokio::task::spawn_blocking(move || {
        let resp = snap.identify(&req);
        (req, resp)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let resp = resp?;
    state.log_session(&req, &resp);
    Ok(Json(resp))
}

async fn list_documents(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let snap = state.current().ok_or_else(ApiError::loading)?;
    let docs: Vec<_> = snap
        .corpus()
        .documents()
        .iter()
        .map(|d| json!({ "doc_id": d.doc_id(), "class_name": d.class_name() }))
        .collect();
    Ok(Json(serde_json::Value::Array(docs)))
}

async fn get_document(State(state): State<Arc<AppState>>, UrlPath(doc_id): UrlPath<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let snap = state.current().ok_or_else(ApiError::loading)?;
    let doc = snap
        .corpus()
        .get(&doc_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown document '{doc_id}'")))?;
    Ok(Json(json!({
        "doc_id": doc.doc_id(),
        "class_name": doc.class_name(),
        "sentences": doc.sentences(),
    })))
}

/// The API routes, plus static files from `static_dir` under `/` when given.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/identify", post(identify))
        .route("/api/documents", get(list_documents))
        .route("/api/documents/{doc_id}", get(get_document))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Bind `addr` and serve until the process ends. The snapshot is loaded in
/// the background so health checks answer "loading" meanwhile.
pub async fn serve(addr: SocketAddr, cfg: SnapshotConfig, state: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match Snapshot::load(&cfg) {
        Ok(s) => {
            log::info!("model ready: {} documents, corpus {}", s.corpus().len(), s.corpus_id());
            loader.install(s);
        }
        Err(e) => log::error!("model load failed: {e}"),
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await
}
