//! JSON-over-HTTP API.
//!
//! Sessions are kept in memory. Each session has its own async mutex, so
//! requests of one session run one at a time while different sessions
//! proceed in parallel. Every request navigates on the graph snapshot that
//! was current when it acquired its session.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use imgraph_core::navigator::{
    KeywordIndex, MapResponse, NavConfig, NavError, Navigator, SessionState, Viewport, ZoomDirection,
    DEFAULT_COLS, DEFAULT_ROWS,
};

use crate::improver::GraphStore;

pub const SESSION_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, Copy)]
pub struct ApiSettings {
    pub cols: usize,
    pub rows: usize,
    pub nav: NavConfig,
    pub idle_timeout: Duration,
}

impl Default for ApiSettings {
    fn default() -> Self {
        Self {
            cols: DEFAULT_COLS,
            rows: DEFAULT_ROWS,
            nav: NavConfig::default(),
            idle_timeout: SESSION_IDLE_TIMEOUT,
        }
    }
}

struct SessionSlot {
    state: tokio::sync::Mutex<SessionState>,
    last_used: Mutex<Instant>,
}

impl SessionSlot {
    fn touch(&self) {
        *self.last_used.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
    }
}

struct Inner {
    keywords: KeywordIndex,
    url_template: String,
    store: Arc<GraphStore>,
    settings: ApiSettings,
    viewport: Viewport,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(
        keywords: KeywordIndex,
        url_template: impl Into<String>,
        store: Arc<GraphStore>,
        settings: ApiSettings,
    ) -> Result<Self, NavError> {
        let viewport = Viewport::new(settings.cols, settings.rows)?;
        Ok(Self {
            inner: Arc::new(Inner {
                keywords,
                url_template: url_template.into(),
                store,
                settings,
                viewport,
                sessions: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn store(&self) -> &Arc<GraphStore> {
        &self.inner.store
    }

    /// Registers a session under `id`; used by the endpoint with a fresh
    /// random id.
    pub fn open_session(&self, id: impl Into<String>) -> String {
        let id = id.into();
        let slot = Arc::new(SessionSlot {
            state: tokio::sync::Mutex::new(SessionState::new(id.clone(), self.inner.viewport)),
            last_used: Mutex::new(Instant::now()),
        });
        self.sessions().insert(id.clone(), slot);
        id
    }

    pub fn session_count(&self) -> usize {
        self.sessions().len()
    }

    /// Drops sessions idle for longer than the timeout as of `now`.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let timeout = self.inner.settings.idle_timeout;
        let mut sessions = self.sessions();
        let before = sessions.len();
        sessions.retain(|_, slot| {
            let last = *slot.last_used.lock().unwrap_or_else(|e| e.into_inner());
            now.saturating_duration_since(last) <= timeout
        });
        before - sessions.len()
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<SessionSlot>>> {
        self.inner.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let slot = self.sessions().get(id).cloned().ok_or(ApiError::UnknownSession)?;
        slot.touch();
        Ok(slot)
    }

    /// Runs `f` with exclusive access to the session and the current snapshot.
    async fn with_session<F>(&self, id: &str, f: F) -> Result<Json<MapResponse>, ApiError>
    where
        F: FnOnce(&Navigator<'_>, &mut SessionState) -> Result<MapResponse, NavError>,
    {
        let slot = self.slot(id)?;
        let mut state = slot.state.lock().await;
        let graph = self.inner.store.snapshot();
        let nav = Navigator::new(&graph, &self.inner.keywords, self.inner.settings.nav);
        Ok(Json(f(&nav, &mut state)?))
    }
}

#[derive(Debug)]
pub enum ApiError {
    Nav(NavError),
    UnknownSession,
    BadRequest,
}

impl From<NavError> for ApiError {
    fn from(e: NavError) -> Self {
        ApiError::Nav(e)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, name) = match &self {
            ApiError::Nav(NavError::KeywordNotFound(_)) => (StatusCode::NOT_FOUND, "KeywordNotFound"),
            ApiError::Nav(NavError::NotFound(_)) => (StatusCode::NOT_FOUND, "NotFound"),
            ApiError::Nav(NavError::NoMap) => (StatusCode::CONFLICT, "NoMap"),
            ApiError::Nav(NavError::AtTopLayer) => (StatusCode::CONFLICT, "AtTopLayer"),
            ApiError::Nav(NavError::AtBottomLayer) => (StatusCode::CONFLICT, "AtBottomLayer"),
            ApiError::Nav(NavError::EmptyKeyword | NavError::InvalidViewport { .. }) | ApiError::BadRequest => {
                (StatusCode::BAD_REQUEST, "BadRequest")
            }
            ApiError::UnknownSession => (StatusCode::NOT_FOUND, "UnknownSession"),
            ApiError::Nav(NavError::Sort(_) | NavError::Graph(_)) => {
                log::error!("navigation failed: {self:?}");
                (StatusCode::INTERNAL_SERVER_ERROR, "Internal")
            }
        };
        (status, Json(ErrorBody { error: name })).into_response()
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConfigBody {
    url_template: String,
    viewport_cols: usize,
    viewport_rows: usize,
    layers: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionBody {
    session_id: String,
}

#[derive(Deserialize)]
struct SearchParams {
    session: String,
    q: String,
}

#[derive(Deserialize)]
struct DragBody {
    session: String,
    dx: i64,
    dy: i64,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Direction {
    In,
    Out,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ZoomBody {
    session: String,
    direction: Direction,
    focus_x: i64,
    focus_y: i64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RecenterBody {
    session: String,
    image_id: u32,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/config", get(config))
        .route("/api/session", post(create_session))
        .route("/api/search", get(search))
        .route("/api/drag", post(drag))
        .route("/api/zoom", post(zoom))
        .route("/api/recenter", post(recenter))
        .with_state(state)
}

async fn config(State(state): State<AppState>) -> Json<ConfigBody> {
    let inner = &state.inner;
    Json(ConfigBody {
        url_template: inner.url_template.clone(),
        viewport_cols: inner.viewport.cols(),
        viewport_rows: inner.viewport.rows(),
        layers: inner.store.snapshot().len(),
    })
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<SessionBody>) {
    let id = state.open_session(uuid::Uuid::new_v4().simple().to_string());
    (StatusCode::CREATED, Json(SessionBody { session_id: id }))
}

async fn search(
    State(state): State<AppState>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Result<Json<MapResponse>, ApiError> {
    let Query(p) = params.map_err(|_| ApiError::BadRequest)?;
    state.with_session(&p.session, |nav, s| nav.search(s, &p.q)).await
}

async fn drag(
    State(state): State<AppState>,
    body: Result<Json<DragBody>, JsonRejection>,
) -> Result<Json<MapResponse>, ApiError> {
    let Json(b) = body.map_err(|_| ApiError::BadRequest)?;
    state.with_session(&b.session, |nav, s| nav.drag(s, b.dx, b.dy)).await
}

async fn zoom(
    State(state): State<AppState>,
    body: Result<Json<ZoomBody>, JsonRejection>,
) -> Result<Json<MapResponse>, ApiError> {
    let Json(b) = body.map_err(|_| ApiError::BadRequest)?;
    let dir = match b.direction {
        Direction::In => ZoomDirection::In,
        Direction::Out => ZoomDirection::Out,
    };
    state
        .with_session(&b.session, |nav, s| nav.zoom(s, dir, b.focus_x, b.focus_y))
        .await
}

async fn recenter(
    State(state): State<AppState>,
    body: Result<Json<RecenterBody>, JsonRejection>,
) -> Result<Json<MapResponse>, ApiError> {
    let Json(b) = body.map_err(|_| ApiError::BadRequest)?;
    state.with_session(&b.session, |nav, s| nav.recenter(s, b.image_id)).await
}

/// Periodically evicts idle sessions until the runtime shuts down.
pub fn spawn_evictor(state: AppState, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = state.evict_idle(Instant::now());
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    })
}
