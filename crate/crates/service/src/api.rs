//! Read-only JSON API over the current snapshot.
//!
//! Readers clone the published `Arc<Snapshot>` and never wait on a reload;
//! reloads build off to the side and swap the pointer under a short write
//! lock. Every response carries the id of the snapshot it was read from.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::json;
use usagelens_core::classifier::UserType;
use usagelens_core::event_model::EventCategory;
use usagelens_core::kpi::UserSummary;
use usagelens_core::timeline::{build_timeline, TimelineError};

use crate::snapshot::{LoadOptions, Snapshot, SnapshotSource};

pub const SNAPSHOT_HEADER: &str = "x-snapshot-id";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

pub struct AppState {
    current: RwLock<Option<Arc<Snapshot>>>,
    next_id: AtomicU64,
    reload_lock: tokio::sync::Mutex<()>,
    source: SnapshotSource,
    options: LoadOptions,
}

impl AppState {
    pub fn new(source: SnapshotSource, options: LoadOptions) -> Arc<Self> {
        Arc::new(Self {
            current: RwLock::new(None),
            next_id: AtomicU64::new(1),
            reload_lock: tokio::sync::Mutex::new(()),
            source,
            options,
        })
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.current.read().expect("snapshot lock").clone()
    }

    /// Loads the source and publishes a new snapshot. On failure the
    /// previous snapshot stays in place.
    pub fn reload_blocking(&self) -> anyhow::Result<Arc<Snapshot>> {
        let analysis = self.source.load(&self.options)?;
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let snap = Arc::new(Snapshot::new(id, analysis));
        *self.current.write().expect("snapshot lock") = Some(snap.clone());
        tracing::info!(snapshot_id = id, users = snap.analysis.store.corpus.users.len(), "snapshot published");
        Ok(snap)
    }

    pub async fn reload(self: &Arc<Self>) -> anyhow::Result<Arc<Snapshot>> {
        let _writer = self.reload_lock.lock().await;
        let me = self.clone();
        tokio::task::spawn_blocking(move || me.reload_blocking()).await?
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    snapshot_id: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>, snap: Option<&Snapshot>) -> Self {
        Self { status, message: message.into(), snapshot_id: snap.map(|s| s.id) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Bytes::from(json!({ "error": self.message }).to_string());
        respond(self.status, body, self.snapshot_id)
    }
}

fn respond(status: StatusCode, body: Bytes, snapshot_id: Option<u64>) -> Response {
    let mut res = (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body)
        .into_response();
    if let Some(id) = snapshot_id {
        res.headers_mut()
            .insert(HeaderName::from_static(SNAPSHOT_HEADER), HeaderValue::from(id));
    }
    res
}

fn ok_json<T: Serialize>(snap: &Snapshot, value: &T) -> Response {
    let body = Bytes::from(serde_json::to_vec(value).expect("payload serializes"));
    respond(StatusCode::OK, body, Some(snap.id))
}

fn snapshot(state: &AppState) -> Result<Arc<Snapshot>, ApiError> {
    state
        .current()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no snapshot loaded", None))
}

async fn overview(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    Ok(respond(StatusCode::OK, snap.overview_json.clone(), Some(snap.id)))
}

async fn visualizations(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    Ok(respond(StatusCode::OK, snap.visualizations_json.clone(), Some(snap.id)))
}

async fn registry(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    Ok(respond(StatusCode::OK, snap.registry_json.clone(), Some(snap.id)))
}

#[derive(Serialize)]
struct Health {
    snapshot_id: u64,
    built_at: String,
}

fn health_of(snap: &Snapshot) -> Health {
    Health { snapshot_id: snap.id, built_at: snap.built_at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true) }
}

async fn health(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    Ok(ok_json(&snap, &health_of(&snap)))
}

#[derive(Debug, Deserialize)]
pub struct UsersQuery {
    #[serde(rename = "type")]
    user_type: Option<String>,
    page: Option<String>,
    page_size: Option<String>,
}

#[derive(Serialize)]
struct UserPage<'a> {
    total: usize,
    page: usize,
    page_size: usize,
    users: Vec<&'a UserSummary>,
}

fn parse_param<T: std::str::FromStr>(
    raw: Option<&str>,
    name: &str,
    default: T,
    snap: &Snapshot,
) -> Result<T, ApiError> {
    match raw {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid `{name}`: `{s}`"), Some(snap))),
    }
}

/// Pages are numbered from 1.
async fn users(
    State(state): State<Arc<AppState>>,
    Query(q): Query<UsersQuery>,
) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let filter: Option<UserType> = match q.user_type.as_deref() {
        None => None,
        Some(t) => Some(parse_param(Some(t), "type", UserType::DemoUser, &snap)?),
    };
    let page: usize = parse_param(q.page.as_deref(), "page", 1, &snap)?;
    let page_size: usize = parse_param(q.page_size.as_deref(), "page_size", DEFAULT_PAGE_SIZE, &snap)?;
    if page == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "`page` starts at 1", Some(&snap)));
    }
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("`page_size` must be between 1 and {MAX_PAGE_SIZE}"),
            Some(&snap),
        ));
    }
    let matching: Vec<&UserSummary> = snap
        .users
        .iter()
        .filter(|u| filter.is_none_or(|t| u.user_type == t))
        .collect();
    let total = matching.len();
    let users = matching.into_iter().skip((page - 1).saturating_mul(page_size)).take(page_size).collect();
    Ok(ok_json(&snap, &UserPage { total, page, page_size, users }))
}

#[derive(Debug, Deserialize)]
pub struct TimelineQuery {
    visit: Option<String>,
    categories: Option<String>,
}

async fn timeline(
    State(state): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    Query(q): Query<TimelineQuery>,
) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let visit: usize = parse_param(q.visit.as_deref(), "visit", 0, &snap)?;
    let categories: Option<BTreeSet<EventCategory>> = match q.categories.as_deref() {
        None => None,
        Some(list) => Some(
            list.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_param(Some(s), "categories", EventCategory::DataManagement, &snap))
                .collect::<Result<_, _>>()?,
        ),
    };
    let a = &snap.analysis;
    match build_timeline(&a.store.corpus, &a.store.registry, &user_id, visit, categories.as_ref()) {
        Ok(t) => Ok(ok_json(&snap, &t)),
        Err(e @ (TimelineError::UnknownUser(_) | TimelineError::VisitOutOfRange { .. })) => {
            Err(ApiError::new(StatusCode::NOT_FOUND, e.to_string(), Some(&snap)))
        }
    }
}

async fn reload(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    match state.reload().await {
        Ok(snap) => Ok(ok_json(&snap, &health_of(&snap))),
        Err(e) => {
            tracing::warn!(error = %format!("{e:#}"), "reload failed");
            let current = state.current();
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("reload failed: {e:#}"), current.as_deref()))
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/overview", get(overview))
        .route("/api/visualizations", get(visualizations))
        .route("/api/users", get(users))
        .route("/api/users/{id}/timeline", get(timeline))
        .route("/api/registry", get(registry))
        .route("/api/health", get(health))
        .route("/api/reload", post(reload))
        .with_state(state)
}
