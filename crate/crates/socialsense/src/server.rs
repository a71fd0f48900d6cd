//! HTTP/JSON front of the gateway.
//!
//! One mutex guards the gateway; every handler first syncs the timeline to
//! the replay clock, and a ticker task does the same while nobody is
//! calling. New prompts wake long-poll readers and go out on the SSE stream.

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use socialsense_core::gateway::{ClockState, ReplayCommand};
use socialsense_core::Millis;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, Notify};

use crate::gateway::{Gateway, IntervalSubmission, Notification, PromptView, ResponseSubmission};

const TICK: Duration = Duration::from_millis(50);
const DEFAULT_WAIT_MS: u64 = 20_000;
const MAX_WAIT_MS: u64 = 120_000;

#[derive(Debug, Clone)]
pub struct AppState {
    gateway: Arc<Mutex<Gateway>>,
    events: broadcast::Sender<Notification>,
    changed: Arc<Notify>,
}

impl AppState {
    pub fn new(gateway: Gateway) -> Self {
        let (events, _) = broadcast::channel(1024);
        Self { gateway: Arc::new(Mutex::new(gateway)), events, changed: Arc::new(Notify::new()) }
    }

    fn lock(&self) -> MutexGuard<'_, Gateway> {
        self.gateway.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` on a synced gateway, then publishes what it produced.
    fn with<T>(&self, f: impl FnOnce(&mut Gateway) -> crate::Result<T>) -> Result<T, ApiError> {
        let (out, notes) = {
            let mut gw = self.lock();
            let out = gw.sync().map_err(ApiError::from).and_then(|_| f(&mut gw).map_err(ApiError::from));
            (out, gw.drain_notifications())
        };
        if !notes.is_empty() {
            for n in notes {
                let _ = self.events.send(n);
            }
            self.changed.notify_waiters();
        }
        out
    }

    pub fn tick(&self) {
        if let Err(e) = self.with(|_| Ok(())) {
            tracing::error!(error = ?e, "timeline sync failed");
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl From<crate::Error> for ApiError {
    fn from(e: crate::Error) -> Self {
        use socialsense_core::Error as Core;
        match e {
            crate::Error::Core(Core::NotFound(what)) => {
                ApiError { status: StatusCode::NOT_FOUND, body: json!({ "error": format!("{what} not found") }) }
            }
            crate::Error::Core(Core::Validation { field, reason }) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": reason, "field": field }),
            },
            other => {
                tracing::error!(error = %other, "request failed");
                ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, body: json!({ "error": other.to_string() }) }
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, body: json!({ "error": r.body_text() }) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
struct PromptQuery {
    since: Option<Millis>,
    wait_ms: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PromptList {
    pub now_ms: Millis,
    pub prompts: Vec<PromptView>,
}

#[derive(Debug, Deserialize)]
struct RangeQuery {
    from: Option<Millis>,
    to: Option<Millis>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/prompts", get(list_prompts))
        .route("/api/prompts/stream", get(stream_prompts))
        .route("/api/prompts/{id}/response", post(post_response))
        .route("/api/interactions", post(add_interaction))
        .route("/api/interactions/{id}", patch(edit_interaction))
        .route("/api/segments", get(list_segments))
        .route("/api/replay/control", post(control))
        .route("/api/replay/clock", get(clock))
        .route("/api/replay/probes", get(list_probes))
        .with_state(state)
}

/// Without `since` this answers at once with every prompt. With `since` it
/// waits up to `wait_ms` for a prompt issued at or after it.
async fn list_prompts(State(st): State<AppState>, Query(q): Query<PromptQuery>) -> ApiResult<Json<PromptList>> {
    let since = q.since.unwrap_or(0);
    let wait = if q.since.is_some() { q.wait_ms.unwrap_or(DEFAULT_WAIT_MS).min(MAX_WAIT_MS) } else { 0 };
    let deadline = tokio::time::Instant::now() + Duration::from_millis(wait);
    loop {
        let changed = st.changed.notified();
        let list = st.with(|gw| Ok(PromptList { now_ms: gw.clock_state().now_ms, prompts: gw.prompts_since(since) }))?;
        if !list.prompts.is_empty() || tokio::time::Instant::now() >= deadline {
            return Ok(Json(list));
        }
        // the ticker wakes us when the clock issues a prompt
        let _ = tokio::time::timeout_at(deadline, changed).await;
    }
}

async fn stream_prompts(State(st): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = st.events.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(n) => {
                    let name = match &n {
                        Notification::Prompt(_) => "prompt",
                        Notification::Response(_) => "response",
                        Notification::Interaction(_) => "interaction",
                    };
                    let data = match &n {
                        Notification::Prompt(p) => serde_json::to_string(p),
                        Notification::Response(r) => serde_json::to_string(r),
                        Notification::Interaction(i) => serde_json::to_string(i),
                    }
                    .expect("notifications serialize");
                    return Some((Ok(Event::default().event(name).data(data)), rx));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "slow SSE reader");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn post_response(
    State(st): State<AppState>,
    Path(id): Path<u64>,
    body: Result<Json<ResponseSubmission>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(sub) = body?;
    let rec = st.with(|gw| gw.respond(id, sub))?;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn add_interaction(
    State(st): State<AppState>,
    body: Result<Json<IntervalSubmission>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(sub) = body?;
    let stored = st.with(|gw| gw.mutate(None, sub))?;
    Ok((StatusCode::CREATED, Json(stored)))
}

async fn edit_interaction(
    State(st): State<AppState>,
    Path(id): Path<u64>,
    body: Result<Json<IntervalSubmission>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(sub) = body?;
    let stored = st.with(|gw| gw.mutate(Some(id), sub))?;
    Ok(Json(stored))
}

async fn list_segments(State(st): State<AppState>, Query(q): Query<RangeQuery>) -> ApiResult<impl IntoResponse> {
    let (from, to) = (q.from.unwrap_or(0), q.to.unwrap_or(Millis::MAX));
    Ok(Json(st.with(|gw| Ok(gw.segments_between(from, to)))?))
}

async fn list_probes(State(st): State<AppState>, Query(q): Query<RangeQuery>) -> ApiResult<impl IntoResponse> {
    let (from, to) = (q.from.unwrap_or(0), q.to.unwrap_or(Millis::MAX));
    Ok(Json(st.with(|gw| Ok(gw.probes_between(from, to)))?))
}

async fn control(
    State(st): State<AppState>,
    body: Result<Json<ReplayCommand>, JsonRejection>,
) -> ApiResult<Json<ClockState>> {
    let Json(cmd) = body?;
    Ok(Json(st.with(|gw| gw.control(cmd))?))
}

async fn clock(State(st): State<AppState>) -> ApiResult<Json<ClockState>> {
    Ok(Json(st.with(|gw| Ok(gw.clock_state()))?))
}

/// Serves until `shutdown` resolves, ticking the timeline in the background.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let ticker_state = state.clone();
    let ticker = tokio::spawn(async move {
        let mut iv = tokio::time::interval(TICK);
        iv.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            iv.tick().await;
            let st = ticker_state.clone();
            // fsync happens under the lock; keep it off the reactor
            let _ = tokio::task::spawn_blocking(move || st.tick()).await;
        }
    });
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    ticker.abort();
    result
}
