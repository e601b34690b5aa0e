//! HTTP service for the chat console: start conversations, stream their
//! records as NDJSON, take admin input and serve artifacts.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use super::{prepare, safe_join, write_summary, BackendChoice, LlmSettings, ServiceError, Source, Summary, TRANSCRIPT_FILE};
use crate::agents::{bundled_scenario, Topology};
use crate::orchestrator::{AdminAction, AdminHook, AdminMode, ConversationLimits, TranscriptStore};

const INDEX_HTML: &str = include_str!("../../data/console/index.html");

#[derive(Clone, Debug)]
pub struct ServeConfig {
    /// Each conversation gets a subdirectory named after its id.
    pub root: PathBuf,
    pub llm: LlmSettings,
    pub api_key: Option<String>,
    pub limits: ConversationLimits,
    /// How long an interactive admin turn waits before skipping.
    pub admin_timeout: Duration,
}

struct Conversation {
    topology: Topology,
    store: Arc<TranscriptStore>,
    admin: Arc<AdminHook>,
}

pub struct ServerState {
    config: ServeConfig,
    conversations: Mutex<HashMap<String, Arc<Conversation>>>,
}

impl ServerState {
    pub fn new(config: ServeConfig) -> Arc<Self> {
        Arc::new(ServerState { config, conversations: Mutex::new(HashMap::new()) })
    }

    fn get(&self, id: &str) -> Option<Arc<Conversation>> {
        self.conversations.lock().expect("state poisoned").get(id).cloned()
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StartRequest {
    /// Task text (llm backend).
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub topology: Option<Topology>,
    pub backend: BackendChoice,
    /// Bundled scenario name (scripted backend).
    #[serde(default)]
    pub scenario: Option<String>,
    /// Defaults to interactive.
    #[serde(default)]
    pub admin_mode: Option<AdminMode>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
enum AdminRequest {
    Text { text: String },
    Approve,
    Revise { text: String },
    Abort,
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: usize,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

fn source_for(state: &ServerState, req: &StartRequest) -> Result<Source, ServiceError> {
    match req.backend {
        BackendChoice::Scripted => {
            let name = req.scenario.as_deref().ok_or_else(|| ServiceError::Config("scripted backend needs `scenario`".into()))?;
            let script = bundled_scenario(name).ok_or_else(|| ServiceError::Config(format!("unknown scenario `{name}`")))?;
            if let Some(t) = req.topology.filter(|t| *t != script.topology) {
                return Err(ServiceError::Config(format!("scenario `{name}` is a {} chat, not {t}", script.topology)));
            }
            Ok(Source::Script(script))
        }
        BackendChoice::Llm => Ok(Source::Task {
            text: req.task.clone().unwrap_or_default(),
            topology: req.topology.ok_or_else(|| ServiceError::Config("llm backend needs `topology`".into()))?,
            llm: state.config.llm.clone(),
            api_key: state.config.api_key.clone(),
        }),
    }
}

async fn start(State(state): State<Arc<ServerState>>, Json(req): Json<StartRequest>) -> Response {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let workdir = state.config.root.join(&id);
    let job = match source_for(&state, &req).and_then(|s| prepare(&id, s, state.config.limits.clone(), &workdir)) {
        Ok(j) => j,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let store = match TranscriptStore::create(&workdir.join(TRANSCRIPT_FILE)) {
        Ok(s) => Arc::new(s),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, format!("cannot create transcript: {e}")),
    };
    let mode = req.admin_mode.unwrap_or(AdminMode::Interactive);
    let admin = Arc::new(AdminHook::new(mode, state.config.admin_timeout));
    let conv = Arc::new(Conversation { topology: req.topology.unwrap_or(Topology::GroupChat), store, admin });
    state.conversations.lock().expect("state poisoned").insert(id.clone(), conv.clone());

    let thread_id = id.clone();
    thread::spawn(move || match job(&conv.admin, &conv.store) {
        Ok(t) => {
            if let Err(e) = write_summary(&workdir, &Summary::of(&t)) {
                log::error!("conversation {thread_id}: {e}");
            }
            log::info!("conversation {thread_id} ended: {}", t.termination);
        }
        Err(e) => log::error!("conversation {thread_id} did not start: {e}"),
    });
    let body = json!({
        "id": id,
        "events": format!("/conversations/{id}/events"),
        "artifacts": format!("/artifacts/{id}/"),
    });
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn list(State(state): State<Arc<ServerState>>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = state.conversations.lock().expect("state poisoned").keys().cloned().collect();
    ids.sort();
    Json(ids)
}

async fn status(State(state): State<Arc<ServerState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(conv) = state.get(&id) else { return error(StatusCode::NOT_FOUND, "no such conversation") };
    Json(json!({
        "id": id,
        "topology": conv.topology,
        "records": conv.store.len(),
        "closed": conv.store.is_closed(),
        "awaiting_admin": conv.admin.awaiting_input(),
        "pending_admin": conv.admin.pending(),
    }))
    .into_response()
}

/// Streams records `from..` as NDJSON, following the conversation until
/// its termination record has been sent.
async fn events(State(state): State<Arc<ServerState>>, UrlPath(id): UrlPath<String>, Query(q): Query<EventsQuery>) -> Response {
    let Some(conv) = state.get(&id) else { return error(StatusCode::NOT_FOUND, "no such conversation") };
    let rx = conv.store.subscribe();
    let stream = futures_util::stream::unfold((conv, rx, q.from), |(conv, mut rx, from)| async move {
        loop {
            // Mark the current length seen before reading, so an append
            // racing with the snapshot still wakes us.
            rx.borrow_and_update();
            let lines = conv.store.snapshot(from);
            if !lines.is_empty() {
                let mut buf = String::new();
                for l in &lines {
                    buf.push_str(l);
                    buf.push('\n');
                }
                let next = from + lines.len();
                return Some((Ok::<_, Infallible>(Bytes::from(buf)), (conv, rx, next)));
            }
            if conv.store.is_closed() || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Response::builder()
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .header(header::CACHE_CONTROL, "no-cache")
        .body(Body::from_stream(stream))
        .expect("static headers are valid")
}

async fn admin(State(state): State<Arc<ServerState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let Some(conv) = state.get(&id) else { return error(StatusCode::NOT_FOUND, "no such conversation") };
    let req: AdminRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    if conv.store.is_closed() {
        return error(StatusCode::CONFLICT, "conversation has ended");
    }
    let action = match req {
        AdminRequest::Text { text } => AdminAction::Text(text),
        AdminRequest::Approve => AdminAction::Approve,
        AdminRequest::Revise { text } => AdminAction::Revise(text),
        AdminRequest::Abort => AdminAction::Abort,
    };
    conv.admin.submit(action);
    let body = json!({ "queued": conv.admin.pending(), "awaiting_admin": conv.admin.awaiting_input() });
    (StatusCode::ACCEPTED, Json(body)).into_response()
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jsonl") => "application/x-ndjson",
        Some("json") => "application/json",
        _ => "text/plain; charset=utf-8",
    }
}

async fn artifact(State(state): State<Arc<ServerState>>, UrlPath(path): UrlPath<String>) -> Response {
    let Some(full) = safe_join(&state.config.root, &path) else { return error(StatusCode::BAD_REQUEST, "bad artifact path") };
    match tokio::fs::read(&full).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&full))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "no such artifact"),
    }
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

pub fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/conversations", post(start).get(list))
        .route("/conversations/{id}", get(status))
        .route("/conversations/{id}/events", get(events))
        .route("/conversations/{id}/admin", post(admin))
        .route("/artifacts/{*path}", get(artifact))
        .with_state(state)
}

/// Binds the listening socket; failure is reported with exit code 2.
pub async fn bind(host: &str, port: u16) -> Result<TcpListener, ServiceError> {
    TcpListener::bind((host, port)).await.map_err(|e| ServiceError::Bind(format!("{host}:{port}: {e}")))
}

pub async fn serve(listener: TcpListener, config: ServeConfig) -> Result<(), ServiceError> {
    std::fs::create_dir_all(&config.root).map_err(|e| ServiceError::Config(format!("{}: {e}", config.root.display())))?;
    axum::serve(listener, router(ServerState::new(config))).await.map_err(|e| ServiceError::Runtime(e.to_string()))
}
