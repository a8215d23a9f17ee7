//! HTTP API over a [`FeedStore`].
//!
//! | method | path                            | body / response                |
//! |--------|---------------------------------|--------------------------------|
//! | GET    | `/api/feed?cursor=&limit=`      | [`FeedPage`]                   |
//! | GET    | `/api/videos/{id}`              | `FeedDocument` JSON            |
//! | GET    | `/api/videos/{id}/descriptions` | `DescriptionSet` JSON          |
//! | POST   | `/api/events`                   | `InteractionEvent` → [`EventAck`] |
//! | GET    | `/media/{id}`                   | video bytes                    |
//!
//! Every JSON response carries `schema_version`. Errors are
//! `{"schema_version":1,"error":{"code":"...","message":"..."}}`.
//! Anything else is served from the static asset directory when one is set.

use std::net::{SocketAddr, TcpListener};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::oneshot;

use crate::store::{FeedStore, InteractionEvent, StoreError, SCHEMA_VERSION};
use crate::summarize::DescriptionSet;

pub const DEFAULT_PAGE_SIZE: usize = 10;
pub const MAX_PAGE_SIZE: usize = 100;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
struct AppState {
    store: Arc<FeedStore>,
    static_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorBody {
    schema_version: u32,
    error: ErrorDetail,
}

#[derive(Serialize)]
struct ErrorDetail {
    code: &'static str,
    message: String,
}

struct ApiError(StatusCode, &'static str, String);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::InvalidCursor(_) => (StatusCode::BAD_REQUEST, "invalid_cursor"),
            StoreError::InvalidPageSize => (StatusCode::BAD_REQUEST, "invalid_page_size"),
            StoreError::UnknownControl(_) => (StatusCode::BAD_REQUEST, "unknown_control"),
            StoreError::SchemaViolation(_) => (StatusCode::BAD_REQUEST, "schema_violation"),
            StoreError::NonMonotonicTimestamp { .. } => {
                (StatusCode::BAD_REQUEST, "non_monotonic_timestamp")
            }
            StoreError::ConcurrentWrite(_) => (StatusCode::CONFLICT, "concurrent_write"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            schema_version: SCHEMA_VERSION,
            error: ErrorDetail {
                code: self.1,
                message: self.2,
            },
        };
        (self.0, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct FeedQuery {
    cursor: Option<String>,
    limit: Option<usize>,
}

/// `GET /api/videos/{id}/descriptions` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionsResponse {
    pub schema_version: u32,
    pub video_id: String,
    #[serde(flatten)]
    pub descriptions: DescriptionSet,
}

async fn feed(
    State(st): State<AppState>,
    Query(q): Query<FeedQuery>,
) -> Result<Response, ApiError> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_SIZE).min(MAX_PAGE_SIZE);
    let page = st.store.list_feed(q.cursor.as_deref(), limit)?;
    Ok(Json(page).into_response())
}

async fn video(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    Ok(Json(st.store.load_document(&id)?).into_response())
}

async fn descriptions(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let doc = st.store.load_document(&id)?;
    let set = doc.description_set.ok_or_else(|| {
        ApiError(
            StatusCode::NOT_FOUND,
            "not_described",
            format!("video {id} has no descriptions yet"),
        )
    })?;
    Ok(Json(DescriptionsResponse {
        schema_version: SCHEMA_VERSION,
        video_id: id,
        descriptions: set,
    })
    .into_response())
}

async fn events(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))?;
    let event = InteractionEvent::from_json(&value)?;
    let ack = st.store.log_event(&event)?;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

fn content_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("mp4" | "m4v") => "video/mp4",
        Some("webm") => "video/webm",
        Some("mov") => "video/quicktime",
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn media(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let path = st
        .store
        .media_path(&id)
        .ok_or_else(|| ApiError::from(StoreError::NotFound(id.clone())))?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::from(StoreError::NotFound(id)))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn assets(State(st): State<AppState>, uri: Uri) -> Response {
    let not_found = || {
        ApiError(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no route {uri}"),
        )
        .into_response()
    };
    let Some(dir) = st.static_dir.as_ref() else {
        return not_found();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return not_found();
    }
    let path = dir.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => not_found(),
    }
}

pub fn router(store: Arc<FeedStore>, static_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/api/feed", get(feed))
        .route("/api/videos/{id}", get(video))
        .route("/api/videos/{id}/descriptions", get(descriptions))
        .route("/api/events", post(events))
        .route("/media/{id}", get(media))
        .fallback(assets)
        .with_state(AppState { store, static_dir })
}

/// Binds `addr`, mapping an occupied port to [`ServeError::PortInUse`].
pub fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    let listener = TcpListener::bind(addr).map_err(|source| {
        if source.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse(addr.port())
        } else {
            ServeError::Bind { addr, source }
        }
    })?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

async fn run(
    listener: TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Serves until Ctrl-C.
pub fn serve_forever(
    listener: TcpListener,
    store: Arc<FeedStore>,
    static_dir: Option<PathBuf>,
) -> Result<(), ServeError> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(run(listener, router(store, static_dir), async {
        let _ = tokio::signal::ctrl_c().await;
    }))
}

/// A server running on a background thread; stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), ServeError>>>,
}

impl ServerHandle {
    pub fn spawn(
        listener: TcpListener,
        store: Arc<FeedStore>,
        static_dir: Option<PathBuf>,
    ) -> Result<Self, ServeError> {
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(run(listener, router(store, static_dir), async {
                let _ = rx.await;
            }))
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> Result<(), ServeError> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> Result<(), ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().expect("server thread panicked"),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}
