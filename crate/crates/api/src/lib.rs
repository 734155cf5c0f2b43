//! REST interface over an [`Infrastructure`].
//!
//! Every request takes the infrastructure lock for the duration of one
//! operation; operations run on the virtual clock, so even a creation that
//! costs 15 virtual seconds returns in microseconds of wall time.

mod error;
mod sink;

pub use error::{status_of, ApiError};
pub use sink::TcpSink;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vwsn_core::model::GeoPoint;
use vwsn_core::provisioning::CreateRequest;
use vwsn_core::registry::DiscoveryQuery;
use vwsn_core::{Infrastructure, ScheduledAction, ServiceError};

pub type Shared = Arc<Mutex<Infrastructure>>;

#[derive(Clone)]
pub struct AppState {
    infra: Shared,
}

impl AppState {
    pub fn new(infra: Infrastructure) -> Self {
        AppState {
            infra: Arc::new(Mutex::new(infra)),
        }
    }

    pub fn shared(&self) -> Shared {
        Arc::clone(&self.infra)
    }

    fn lock(&self) -> MutexGuard<'_, Infrastructure> {
        // a panic inside one handler must not take the whole service down
        self.infra.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sensors", get(list_sensors))
        .route("/v1/sensors/{node_id}", get(get_sensor))
        .route("/v1/vs", post(create_vs).get(list_vs))
        .route("/v1/vs/{vs_id}", get(get_vs).delete(delete_vs))
        .route("/v1/vs/{vs_id}/start", post(start_vs))
        .route("/v1/vs/{vs_id}/stop", post(stop_vs))
        .route("/v1/vs/{vs_id}/migrate", post(migrate_vs))
        .route("/v1/schedule", post(schedule))
        .route(
            "/v1/schedule/{id}",
            get(get_schedule).delete(cancel_schedule),
        )
        .route("/v1/metrics", get(metrics))
        .route("/v1/session", post(open_session).delete(close_session))
        .route("/v1/clock", get(clock))
        .route("/v1/clock/advance", post(advance_clock))
        .fallback(|| async { ApiError::new(vwsn_core::ErrorCode::NotFound, "no such route") })
        .with_state(state)
}

/// JSON body parsed with our own error mapping instead of axum's rejection.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(e.to_string()).into())
}

fn parse<T: std::str::FromStr>(
    q: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    q.get(key)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>().map_err(|e| {
                ApiError::new(vwsn_core::ErrorCode::InvalidQuery, format!("{key}: {e}"))
            })
        })
        .transpose()
}

/// Builds a discovery query from `capability, unit, lat, lon, radius_m,
/// max_interval_ms, available, min_battery`.
pub fn discovery_query(q: &HashMap<String, String>) -> Result<DiscoveryQuery, ApiError> {
    const KNOWN: [&str; 8] = [
        "capability",
        "unit",
        "lat",
        "lon",
        "radius_m",
        "max_interval_ms",
        "available",
        "min_battery",
    ];
    if let Some(k) = q.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(ApiError::new(
            vwsn_core::ErrorCode::InvalidQuery,
            format!("unknown parameter {k:?}"),
        ));
    }
    let center = match (parse::<f64>(q, "lat")?, parse::<f64>(q, "lon")?) {
        (Some(lat), Some(lon)) => Some(
            GeoPoint::new(lat, lon)
                .map_err(|e| ApiError::new(vwsn_core::ErrorCode::InvalidQuery, e.to_string()))?,
        ),
        (None, None) => None,
        _ => {
            return Err(ApiError::new(
                vwsn_core::ErrorCode::InvalidQuery,
                "lat and lon go together",
            ))
        }
    };
    Ok(DiscoveryQuery {
        capability: parse(q, "capability")?,
        unit: parse(q, "unit")?,
        center,
        radius_m: parse(q, "radius_m")?,
        max_interval_ms: parse(q, "max_interval_ms")?,
        available_only: parse(q, "available")?.unwrap_or(false),
        min_battery: parse(q, "min_battery")?,
    })
}

async fn list_sensors(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let query = discovery_query(&q)?;
    let out = s.lock().sensors(&query)?;
    Ok(Json(out).into_response())
}

async fn get_sensor(
    State(s): State<AppState>,
    Path(node_id): Path<String>,
) -> Result<Response, ApiError> {
    match s.lock().sensor(&node_id) {
        Some(v) => Ok(Json(v).into_response()),
        None => Err(ApiError::new(
            vwsn_core::ErrorCode::UnknownNode,
            format!("unknown node {node_id:?}"),
        )),
    }
}

async fn create_vs(State(s): State<AppState>, raw: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = body(&raw)?;
    let view = s.lock().create(req)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_vs(State(s): State<AppState>) -> Response {
    Json(s.lock().list()).into_response()
}

async fn get_vs(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(s.lock().get(&id)?).into_response())
}

async fn start_vs(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(s.lock().start(&id)?).into_response())
}

async fn stop_vs(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(s.lock().stop(&id)?).into_response())
}

async fn delete_vs(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    s.lock().delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MigrateBody {
    target_node_id: String,
}

async fn migrate_vs(
    State(s): State<AppState>,
    Path(id): Path<String>,
    raw: Bytes,
) -> Result<Response, ApiError> {
    let b: MigrateBody = body(&raw)?;
    Ok(Json(s.lock().migrate(&id, &b.target_node_id)?).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScheduleBody {
    pub due_ms: u64,
    #[serde(flatten)]
    pub action: ScheduledAction,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScheduleCreated {
    pub schedule_id: u64,
}

async fn schedule(State(s): State<AppState>, raw: Bytes) -> Result<Response, ApiError> {
    let b: ScheduleBody = body(&raw)?;
    let schedule_id = s.lock().schedule(b.action, b.due_ms)?;
    Ok((StatusCode::CREATED, Json(ScheduleCreated { schedule_id })).into_response())
}

async fn get_schedule(
    State(s): State<AppState>,
    Path(id): Path<u64>,
) -> Result<Response, ApiError> {
    match s.lock().schedule_entry(id) {
        Some(v) => Ok(Json(v).into_response()),
        None => Err(ApiError::new(
            vwsn_core::ErrorCode::UnknownSchedule,
            format!("unknown schedule entry {id}"),
        )),
    }
}

async fn cancel_schedule(
    State(s): State<AppState>,
    Path(id): Path<u64>,
) -> Result<StatusCode, ApiError> {
    s.lock().cancel_schedule(id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn metrics(State(s): State<AppState>) -> Response {
    Json(s.lock().metrics()).into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClockView {
    pub now_ms: u64,
    pub session_open: bool,
}

fn clock_view(infra: &Infrastructure) -> ClockView {
    ClockView {
        now_ms: infra.now(),
        session_open: infra.session_open(),
    }
}

async fn open_session(State(s): State<AppState>) -> Response {
    let mut infra = s.lock();
    infra.open_session();
    Json(clock_view(&infra)).into_response()
}

async fn close_session(State(s): State<AppState>) -> StatusCode {
    s.lock().close_session();
    StatusCode::NO_CONTENT
}

async fn clock(State(s): State<AppState>) -> Response {
    Json(clock_view(&s.lock())).into_response()
}

/// Either a relative step or an absolute target.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceBody {
    #[serde(default)]
    pub by_ms: Option<u64>,
    #[serde(default)]
    pub to_ms: Option<u64>,
}

async fn advance_clock(State(s): State<AppState>, raw: Bytes) -> Result<Response, ApiError> {
    let b: AdvanceBody = body(&raw)?;
    let mut infra = s.lock();
    let target = match (b.by_ms, b.to_ms) {
        (Some(dt), None) => infra.now().saturating_add(dt),
        (None, Some(t)) if t >= infra.now() => t,
        (None, Some(t)) => {
            return Err(ApiError::new(
                vwsn_core::ErrorCode::PastDue,
                format!("cannot move the clock back to {t}"),
            ))
        }
        _ => {
            return Err(
                ServiceError::BadRequest("give exactly one of by_ms and to_ms".into()).into(),
            )
        }
    };
    infra.advance_to(target);
    Ok(Json(clock_view(&infra)).into_response())
}

/// Keeps the virtual clock at least as far as the wall clock since start.
/// Operations may run the virtual clock ahead; pacing then waits for the
/// wall clock to catch up.
pub async fn pace_realtime(infra: Shared, tick: Duration) {
    let origin_wall = tokio::time::Instant::now();
    let origin_virtual = infra.lock().unwrap_or_else(|p| p.into_inner()).now();
    let mut ticker = tokio::time::interval(tick);
    loop {
        ticker.tick().await;
        let target = origin_virtual + origin_wall.elapsed().as_millis() as u64;
        let mut g = infra.lock().unwrap_or_else(|p| p.into_inner());
        if target > g.now() {
            g.advance_to(target);
        }
    }
}

/// A service running on its own thread and runtime, for callers that are not
/// async themselves. Shuts down when dropped.
pub struct Background {
    addr: std::net::SocketAddr,
    shared: Shared,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Background {
    pub fn spawn(infra: Infrastructure, listen: std::net::SocketAddr) -> std::io::Result<Self> {
        let state = AppState::new(infra);
        let shared = state.shared();
        let listener = std::net::TcpListener::bind(listen)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("vwsn-api".into())
            .spawn(move || {
                rt.block_on(async move {
                    let listener = match tokio::net::TcpListener::from_std(listener) {
                        Ok(l) => l,
                        Err(e) => return log::error!("listener: {e}"),
                    };
                    let served =
                        axum::serve(listener, router(state)).with_graceful_shutdown(async {
                            let _ = rx.await;
                        });
                    if let Err(e) = served.await {
                        log::error!("server stopped: {e}");
                    }
                })
            })?;
        Ok(Background {
            addr,
            shared,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Direct access to the infrastructure behind the server.
    pub fn shared(&self) -> Shared {
        Arc::clone(&self.shared)
    }
}

impl Drop for Background {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
