use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, oneshot};
use tokio::task::JoinHandle;

use super::config::ServiceConfig;
use super::snapshot::{EventPayload, HeartbeatInfo, StreamEvent};
use super::state::Service;
use super::ServiceError;

/// Wall-clock time in nanoseconds since the epoch.
pub fn now_ns() -> i64 {
    chrono::Utc::now().timestamp_nanos_opt().unwrap_or(i64::MAX)
}

/// Accepts integer nanoseconds or an RFC 3339 timestamp.
pub fn parse_time_arg(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Some(n);
    }
    chrono::DateTime::parse_from_rfc3339(s).ok()?.timestamp_nanos_opt()
}

#[derive(Clone)]
struct AppState {
    svc: Arc<Service>,
    config_path: Option<PathBuf>,
    heartbeat: Duration,
}

pub fn router(svc: Arc<Service>, config_path: Option<PathBuf>) -> Router {
    let heartbeat = Duration::from_secs(svc.config().heartbeat_s.max(1));
    Router::new()
        .route("/ingest", post(ingest))
        .route("/jobs", post(jobs))
        .route("/snapshot", get(snapshot))
        .route("/topology", get(topology))
        .route("/stream", get(stream))
        .route("/query", post(query))
        .route("/reload", post(reload))
        .route("/healthz", get(healthz))
        .with_state(AppState {
            svc,
            config_path,
            heartbeat,
        })
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn ingest(State(st): State<AppState>, body: String) -> Response {
    let svc = st.svc.clone();
    let receipt = now_ns();
    let report = tokio::task::spawn_blocking(move || svc.apply_ingest(&body, receipt))
        .await
        .expect("ingest task does not panic");
    let status = if report.all_rejected() {
        StatusCode::BAD_REQUEST
    } else {
        StatusCode::OK
    };
    (status, Json(report)).into_response()
}

async fn jobs(State(st): State<AppState>, body: String) -> Response {
    let report = st.svc.apply_jobs(&body);
    let status = if report.all_rejected() {
        StatusCode::BAD_REQUEST
    } else {
        StatusCode::OK
    };
    (status, Json(report)).into_response()
}

async fn snapshot(State(st): State<AppState>) -> Response {
    Json(&*st.svc.snapshot()).into_response()
}

async fn topology(State(st): State<AppState>) -> Response {
    Json(st.svc.topology()).into_response()
}

async fn healthz(State(st): State<AppState>) -> Response {
    let snap = st.svc.snapshot();
    let (accepted, rejected) = st.svc.totals();
    Json(json!({
        "status": "ok",
        "seq": snap.seq,
        "generated_at": snap.generated_at,
        "nodes": snap.nodes.len(),
        "accepted": accepted,
        "rejected": rejected,
    }))
    .into_response()
}

#[derive(Deserialize)]
struct NowParam {
    now: Option<String>,
}

#[derive(Deserialize)]
struct QueryBody {
    q: String,
    now: Option<serde_json::Value>,
}

/// Body is the query text, or `{"q": ..., "now": ...}`. `now` defaults to
/// the wall clock.
async fn query(State(st): State<AppState>, Query(p): Query<NowParam>, body: String) -> Response {
    let (text, mut now) = match serde_json::from_str::<QueryBody>(&body) {
        Ok(b) => {
            let now = match b.now {
                Some(serde_json::Value::Number(n)) => n.as_i64(),
                Some(serde_json::Value::String(s)) => parse_time_arg(&s),
                _ => None,
            };
            (b.q, now)
        }
        Err(_) => (body, None),
    };
    if let Some(s) = p.now {
        match parse_time_arg(&s) {
            Some(t) => now = Some(t),
            None => {
                return error(
                    StatusCode::BAD_REQUEST,
                    json!({"error": format!("bad now value {s:?}")}),
                )
            }
        }
    }
    let now = now.unwrap_or_else(now_ns);
    let svc = st.svc.clone();
    let result = tokio::task::spawn_blocking(move || svc.query(&text, now))
        .await
        .expect("query task does not panic");
    match result {
        Ok(rs) => Json(json!({
            "name": rs.name,
            "columns": rs.columns,
            "rows": rs.to_json_rows(),
            "table": rs.to_table(),
        }))
        .into_response(),
        Err(e) => error(
            StatusCode::BAD_REQUEST,
            json!({"error": e.to_string(), "position": e.position}),
        ),
    }
}

/// Non-empty body: a threshold document. Empty body: re-read the config file.
async fn reload(State(st): State<AppState>, body: String) -> Response {
    let result = if !body.trim().is_empty() {
        st.svc.reload_thresholds(&body).map_err(ServiceError::from)
    } else if let Some(path) = &st.config_path {
        std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
            .and_then(|t| ServiceConfig::parse(&t))
            .and_then(|c| c.thresholds())
            .and_then(|th| st.svc.set_thresholds(th).map_err(ServiceError::from))
    } else {
        Err(ServiceError::Config("empty body and no config file to re-read".into()))
    };
    match result {
        Ok(()) => Json(json!({"status": "reloaded", "thresholds": &*st.svc.thresholds()})).into_response(),
        Err(ServiceError::Thresholds(e)) => error(StatusCode::BAD_REQUEST, json!({"violations": e.violations})),
        Err(e) => error(StatusCode::BAD_REQUEST, json!({"error": e.to_string()})),
    }
}

enum StreamState {
    First(Box<StreamEvent>),
    Live,
}

async fn stream(State(st): State<AppState>) -> Response {
    let (snap, rx) = st.svc.subscribe();
    let first = StreamEvent {
        seq: snap.seq,
        payload: EventPayload::Snapshot(Box::new((*snap).clone())),
    };
    let period = st.heartbeat;
    let hb = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
    let init = (StreamState::First(Box::new(first)), rx, hb, st.svc.clone());
    let lines = futures::stream::unfold(init, |(state, mut rx, mut hb, svc)| async move {
        if let StreamState::First(ev) = state {
            return Some((Ok::<_, Infallible>(ev.to_json_line()), (StreamState::Live, rx, hb, svc)));
        }
        let line = tokio::select! {
            r = rx.recv() => match r {
                Ok(ev) => ev.to_json_line(),
                // Lagging subscribers are dropped rather than slowing the
                // evaluation loop.
                Err(broadcast::error::RecvError::Lagged(_)) | Err(broadcast::error::RecvError::Closed) => return None,
            },
            _ = hb.tick() => StreamEvent {
                seq: svc.snapshot().seq,
                payload: EventPayload::Heartbeat(HeartbeatInfo { at: now_ns() }),
            }
            .to_json_line(),
        };
        Some((Ok(line), (StreamState::Live, rx, hb, svc)))
    });
    Response::builder()
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .header(header::CACHE_CONTROL, "no-cache")
        .body(Body::from_stream(lines))
        .expect("static headers are valid")
}

/// Runs `evaluation_tick` on the configured cadence until aborted.
pub fn spawn_evaluation_loop(svc: Arc<Service>) -> JoinHandle<()> {
    let cadence = Duration::from_millis(svc.config().cadence_ms.max(1));
    tokio::spawn(async move {
        let mut iv = tokio::time::interval(cadence);
        iv.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            iv.tick().await;
            let s = svc.clone();
            if tokio::task::spawn_blocking(move || s.evaluation_tick(now_ns()))
                .await
                .is_err()
            {
                tracing::error!("evaluation pass panicked");
            }
        }
    })
}

/// A server running in the background.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub service: Arc<Service>,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<()>,
    eval: JoinHandle<()>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.eval.abort();
        // Open streams never end on their own, so graceful shutdown is bounded.
        if tokio::time::timeout(Duration::from_secs(2), &mut self.server)
            .await
            .is_err()
        {
            self.server.abort();
        }
    }
}

/// Binds `listen`, starts the evaluation loop and serves until stopped.
pub async fn spawn_server(
    svc: Arc<Service>,
    listen: &str,
    config_path: Option<PathBuf>,
) -> Result<ServerHandle, ServiceError> {
    let listener = TcpListener::bind(listen)
        .await
        .map_err(|e| ServiceError::Bind(format!("{listen}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Bind(e.to_string()))?;
    let app = router(svc.clone(), config_path);
    let (tx, rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let r = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = r {
            tracing::error!("server error: {e}");
        }
    });
    let eval = spawn_evaluation_loop(svc.clone());
    tracing::info!("listening on http://{addr}");
    Ok(ServerHandle {
        addr,
        service: svc,
        shutdown: Some(tx),
        server,
        eval,
    })
}
