//! HTTP and WebSocket front end for live sessions.
//!
//! Each session is owned by one lock; every mutation (operator events,
//! ticks, control) happens under it and publishes the new log entries to
//! the session's broadcast channel before releasing it, so a subscriber that
//! takes a snapshot under the same lock sees every later event exactly once.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hawk_core::model::OperatorEvent;
use hawk_core::session::{Session, SessionError, SessionMode, SessionSnapshot};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;
use tokio::task::JoinHandle;

const STREAM_CAPACITY: usize = 8192;

pub struct SessionHandle {
    session: Mutex<Session>,
    tx: broadcast::Sender<String>,
    ticker: Mutex<Option<JoinHandle<()>>>,
}

impl SessionHandle {
    fn new(session: Session) -> Self {
        let (tx, _) = broadcast::channel(STREAM_CAPACITY);
        Self { session: Mutex::new(session), tx, ticker: Mutex::new(None) }
    }

    /// Runs `f` on the session and publishes whatever it logged.
    fn mutate<R>(&self, f: impl FnOnce(&mut Session) -> R) -> R {
        let mut s = self.session.lock().expect("session lock");
        let before = s.log().len();
        let r = f(&mut s);
        for e in &s.log()[before..] {
            // no subscribers is fine
            let _ = self.tx.send(e.to_line());
        }
        r
    }

    fn subscribe(&self) -> (SessionSnapshot, broadcast::Receiver<String>) {
        let s = self.session.lock().expect("session lock");
        (s.snapshot(), self.tx.subscribe())
    }

    fn stop_ticker(&self) {
        if let Some(h) = self.ticker.lock().expect("ticker lock").take() {
            h.abort();
        }
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<BTreeMap<String, Arc<SessionHandle>>>,
    next: Mutex<u64>,
}

type Shared = Arc<AppState>;

pub fn router() -> Router {
    router_with(Arc::new(AppState::default()))
}

pub fn router_with(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(open_session).get(list_sessions))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/events", post(submit))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/close", post(close))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

pub async fn serve(addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router()).await?;
    Ok(())
}

struct ApiError(StatusCode, &'static str, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "message": self.2 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (code, class) = match &e {
            SessionError::InvalidScenario(_) => (StatusCode::BAD_REQUEST, "invalid_scenario"),
            SessionError::SessionClosed => (StatusCode::CONFLICT, "session_closed"),
            SessionError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            SessionError::CorruptTrace { .. } => (StatusCode::BAD_REQUEST, "corrupt_trace"),
        };
        ApiError(code, class, e.to_string())
    }
}

fn find(state: &AppState, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
    state
        .sessions
        .lock()
        .expect("sessions lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`")))
}

/// Body: scenario in the interchange format; empty for the default scenario.
async fn open_session(State(state): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError(StatusCode::BAD_REQUEST, "invalid_scenario", "body is not UTF-8".into()))?;
    let id = {
        let mut n = state.next.lock().expect("id lock");
        *n += 1;
        format!("s{}", *n)
    };
    let session = if text.trim().is_empty() {
        Session::open(id.clone(), Default::default(), SessionMode::Live)?
    } else {
        Session::open_text(id.clone(), text, SessionMode::Live)?
    };
    let snap = session.snapshot();
    state.sessions.lock().expect("sessions lock").insert(id, Arc::new(SessionHandle::new(session)));
    Ok((StatusCode::CREATED, Json(snap)))
}

async fn list_sessions(State(state): State<Shared>) -> Json<Vec<String>> {
    Json(state.sessions.lock().expect("sessions lock").keys().cloned().collect())
}

async fn snapshot(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionSnapshot>, ApiError> {
    let h = find(&state, &id)?;
    let snap = h.session.lock().expect("session lock").snapshot();
    Ok(Json(snap))
}

async fn submit(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(e): Json<OperatorEvent>,
) -> Result<impl IntoResponse, ApiError> {
    let h = find(&state, &id)?;
    let ack = h.mutate(|s| s.submit(e))?;
    Ok(Json(ack))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
enum Control {
    /// Run in real time, scaled by `speed`.
    Start {
        #[serde(default = "one")]
        speed: f64,
    },
    Pause,
    /// Advance a number of ticks while paused.
    Step {
        #[serde(default = "one_tick")]
        ticks: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_tick() -> u64 {
    1
}

#[derive(Serialize)]
struct ControlReply {
    running: bool,
    clock: f64,
    seq: u64,
}

async fn control(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(c): Json<Control>,
) -> Result<Json<ControlReply>, ApiError> {
    let h = find(&state, &id)?;
    match c {
        Control::Start { speed } => {
            if !(speed.is_finite() && speed > 0.0) {
                return Err(ApiError(StatusCode::BAD_REQUEST, "bad_control", "speed must be positive".into()));
            }
            let (closed, dt) = {
                let s = h.session.lock().expect("session lock");
                (s.closed(), s.mission().config().dt)
            };
            if closed {
                return Err(SessionError::SessionClosed.into());
            }
            h.stop_ticker();
            h.mutate(|s| s.running = true);
            let period = Duration::from_secs_f64(dt / speed);
            let weak = Arc::downgrade(&h);
            let task = tokio::spawn(async move {
                let mut iv = tokio::time::interval(period);
                iv.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                loop {
                    iv.tick().await;
                    let Some(h) = weak.upgrade() else { break };
                    let go_on = h.mutate(|s| {
                        if !s.running || s.closed() {
                            return false;
                        }
                        s.advance(1);
                        !s.mission().finished()
                    });
                    if !go_on {
                        break;
                    }
                }
            });
            *h.ticker.lock().expect("ticker lock") = Some(task);
        }
        Control::Pause => {
            h.stop_ticker();
            h.mutate(|s| s.running = false);
        }
        Control::Step { ticks } => {
            let closed = h.mutate(|s| {
                if !s.closed() {
                    s.advance(ticks);
                }
                s.closed()
            });
            if closed {
                return Err(SessionError::SessionClosed.into());
            }
        }
    }
    let s = h.session.lock().expect("session lock");
    Ok(Json(ControlReply { running: s.running, clock: s.clock(), seq: s.last_seq() }))
}

async fn close(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<ControlReply>, ApiError> {
    let h = find(&state, &id)?;
    h.stop_ticker();
    h.mutate(|s| s.close())?;
    let s = h.session.lock().expect("session lock");
    Ok(Json(ControlReply { running: false, clock: s.clock(), seq: s.last_seq() }))
}

async fn log(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let h = find(&state, &id)?;
    let text = h.session.lock().expect("session lock").log_text();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn stream(
    State(state): State<Shared>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let h = find(&state, &id)?;
    Ok(ws.on_upgrade(move |socket| client(socket, h)))
}

async fn client(mut socket: WebSocket, h: Arc<SessionHandle>) {
    let (snap, mut rx) = h.subscribe();
    let first = json!({ "type": "snapshot", "snapshot": snap }).to_string();
    if socket.send(Message::Text(first.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(line) => {
                    if socket.send(Message::Text(line.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    // the stream is lossless or nothing: drop the client
                    let m = json!({ "type": "error", "error": "lagged", "message": format!("{n} events missed; reconnect") });
                    let _ = socket.send(Message::Text(m.to_string().into())).await;
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<OperatorEvent>(&text) {
                        Ok(e) => match h.mutate(|s| s.submit(e)) {
                            Ok(ack) => json!({ "type": "ack", "seq": ack.seq, "timestamp": ack.timestamp }),
                            Err(e) => {
                                let ApiError(_, class, message) = e.into();
                                json!({ "type": "error", "error": class, "message": message })
                            }
                        },
                        Err(e) => json!({ "type": "error", "error": "bad_event", "message": e.to_string() }),
                    };
                    if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
