//! HTTP and server-sent-events gateway.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration as StdDuration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, Mutex};

use casa_core::engine::EngineError;
use casa_core::system::{Assistant, StreamEvent};
use casa_core::{DeviceId, Scalar, StateValue};

/// Backlog kept per stream subscriber; slower consumers skip ahead.
const STREAM_BACKLOG: usize = 1024;

#[derive(Clone)]
pub struct AppState {
    // tokio's mutex queues waiters fairly, so turns run in arrival order
    assistant: Arc<Mutex<Assistant>>,
    events: broadcast::Sender<Arc<StreamEvent>>,
}

impl AppState {
    pub fn new(assistant: Assistant) -> Self {
        let (events, _) = broadcast::channel(STREAM_BACKLOG);
        Self {
            assistant: Arc::new(Mutex::new(assistant)),
            events,
        }
    }

    /// Runs `f` on the assistant, then publishes whatever it produced.
    async fn with<T>(&self, f: impl FnOnce(&mut Assistant) -> T) -> T {
        let mut a = self.assistant.lock().await;
        let out = f(&mut a);
        for e in a.drain_events() {
            // no subscribers is fine
            let _ = self.events.send(Arc::new(e));
        }
        out
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<StreamEvent>> {
        self.events.subscribe()
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::malformed(r.body_text())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::UnknownDevice(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_device", e.to_string()),
            EngineError::NotVirtual => {
                ApiError::new(StatusCode::CONFLICT, "clock_not_virtual", e.to_string())
            }
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "engine_error", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    #[serde(default = "default_session")]
    pub session_id: String,
    pub utterance: String,
}

fn default_session() -> String {
    "default".into()
}

#[derive(Debug, Serialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub turn_seq: u64,
    pub utterance: String,
    pub text: String,
    pub end_of_exchange: bool,
    pub suggestions: Vec<String>,
    pub contexts: Vec<String>,
}

async fn chat(
    State(app): State<AppState>,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> ApiResult<ChatResponse> {
    let Json(req) = body?;
    if req.session_id.is_empty() {
        return Err(ApiError::malformed("session_id must not be empty"));
    }
    let env = app.with(|a| a.chat(&req.session_id, &req.utterance)).await;
    Ok(Json(ChatResponse {
        session_id: env.session_id,
        turn_seq: env.turn_seq,
        utterance: env.utterance,
        text: env.reply.text,
        end_of_exchange: env.reply.end_of_exchange,
        suggestions: env.reply.suggestions,
        contexts: env.reply.output_contexts.into_iter().map(|c| c.name).collect(),
    }))
}

async fn devices(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.with(|a| a.devices()).await)
}

async fn rules(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.with(|a| a.rules()).await)
}

#[derive(Debug, Deserialize)]
pub struct LogQuery {
    #[serde(default)]
    pub since: u64,
}

async fn log_entries(
    State(app): State<AppState>,
    query: Result<Query<LogQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Query(q) = query.map_err(|r| ApiError::new(StatusCode::BAD_REQUEST, "bad_query", r.body_text()))?;
    Ok(Json(app.with(|a| a.log_since(q.since).to_vec()).await))
}

#[derive(Debug, Deserialize)]
pub struct ClockRequest {
    pub advance_seconds: i64,
}

#[derive(Debug, Serialize)]
pub struct ClockResponse {
    pub now: casa_core::Timestamp,
}

async fn sim_clock(
    State(app): State<AppState>,
    body: Result<Json<ClockRequest>, JsonRejection>,
) -> ApiResult<ClockResponse> {
    let Json(req) = body?;
    if req.advance_seconds < 0 {
        return Err(ApiError::malformed("advance_seconds must not be negative"));
    }
    let now = app
        .with(|a| a.advance(chrono::Duration::seconds(req.advance_seconds)))
        .await?;
    Ok(Json(ClockResponse { now }))
}

/// `{"value": true}` for on/off devices, `{"value": 21.5}` for scalar ones.
#[derive(Debug, Deserialize)]
pub struct DeviceStateRequest {
    pub value: serde_json::Value,
}

async fn sim_device(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<DeviceStateRequest>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(req) = body?;
    let device = DeviceId::new(id);
    app.with(|a| {
        let current = a
            .engine()
            .state_of(&device)
            .ok_or_else(|| EngineError::UnknownDevice(device.clone()))?;
        let value = match (&req.value, current) {
            (serde_json::Value::Bool(b), StateValue::OnOff(_)) => StateValue::OnOff(*b),
            (serde_json::Value::Number(n), StateValue::Scalar(s)) => {
                let v = n.as_f64().ok_or_else(|| ApiError::malformed("value out of range"))?;
                StateValue::Scalar(Scalar::new(v, s.unit))
            }
            _ => return Err(ApiError::malformed("value does not fit the device's state type")),
        };
        a.set_device_state(&device, value).map_err(ApiError::from)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

fn sse_event(e: &StreamEvent) -> Event {
    let kind = match e {
        StreamEvent::Reply { .. } => "reply",
        StreamEvent::StateChange { .. } => "state_change",
        StreamEvent::LogAppend { .. } => "log_append",
        StreamEvent::Clock { .. } => "clock",
    };
    Event::default()
        .event(kind)
        .data(serde_json::to_string(e).expect("stream events serialize"))
}

async fn stream_events(State(app): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = app.subscribe();
    let hello = app.assistant.lock().await.clock_event();
    let live = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((Ok(sse_event(&e)), rx)),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("stream consumer fell behind; dropped {n} events");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream::once(async move { Ok(sse_event(&hello)) }).chain(live))
        .keep_alive(KeepAlive::default())
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/devices", get(devices))
        .route("/v1/rules", get(rules))
        .route("/v1/log", get(log_entries))
        .route("/v1/stream", get(stream_events))
        .route("/v1/sim/clock", post(sim_clock))
        .route("/v1/sim/device/{id}/state", post(sim_device))
        .with_state(app)
}

/// Fires due wakeups once a second when running against the wall clock.
pub fn spawn_ticker(app: AppState) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut every = tokio::time::interval(StdDuration::from_secs(1));
        loop {
            every.tick().await;
            app.with(|a| a.tick()).await;
        }
    })
}

pub async fn serve(assistant: Assistant, port: u16) -> std::io::Result<()> {
    let wall = !assistant.engine().clock().is_virtual();
    let app = AppState::new(assistant);
    if wall {
        spawn_ticker(app.clone());
    }
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
