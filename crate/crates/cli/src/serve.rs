//! HTTP API and live stream for one project.
//!
//! The engine starts paused at virtual zero. `POST /api/run` steers it; while
//! running, a ticker advances virtual time at the configured speed. Every
//! applied, rejected or suppressed event and every status change is pushed to
//! `GET /api/stream` subscribers as one JSON object per line.

use std::convert::Infallible;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;

use smarthouse_core::engine::{ClockMode, EngineError, LogEntry, Outcome, Pacer, Provenance, Simulator, TaskAction};
use smarthouse_core::ids::{DeviceId, ScenarioId, SensorId};
use smarthouse_core::model::{ModelError, SensorValue};
use smarthouse_core::persistence::{self, PersistError};
use smarthouse_core::time::SimTime;
use smarthouse_core::Project;

use crate::args::Horizon;

const TICK: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Paused,
    Running,
}

struct Engine {
    sim: Simulator,
    pacer: Option<Pacer>,
}

pub struct AppState {
    engine: Mutex<Engine>,
    stream: broadcast::Sender<Arc<str>>,
    project_path: Option<PathBuf>,
    speed: f64,
}

pub type Shared = Arc<AppState>;

impl AppState {
    pub fn new(project: Project, project_path: Option<PathBuf>, speed: f64) -> Result<Shared, EngineError> {
        let sim = Simulator::with_mode(project, ClockMode::RealTime { speed })?;
        let (stream, _) = broadcast::channel(4096);
        Ok(Arc::new(AppState { engine: Mutex::new(Engine { sim, pacer: None }), stream, project_path, speed }))
    }

    fn lock(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Forwards pending engine notifications to stream subscribers.
    fn publish(&self, engine: &mut Engine) {
        for n in engine.sim.drain_notifications() {
            match serde_json::to_string(&n) {
                // no subscribers is fine
                Ok(line) => drop(self.stream.send(Arc::from(line))),
                Err(e) => warn!("cannot encode notification: {e}"),
            }
        }
    }

    /// Advances a running engine to the current wall-clock position.
    fn tick(&self) {
        let mut engine = self.lock();
        let Some(pacer) = &engine.pacer else { return };
        let target = pacer.virtual_at(Instant::now());
        if target > engine.sim.now() {
            engine.sim.run_until(target).expect("target is ahead of now");
            self.publish(&mut engine);
        }
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/project", get(get_project).put(put_project))
        .route("/api/save", post(save_project))
        .route("/api/devices/{id}/status", get(device_status))
        .route("/api/devices/{id}/sensors/{sid}", post(set_sensor))
        .route("/api/scenarios/{id}/enabled", post(set_enabled))
        .route("/api/run", get(run_state).post(run_control))
        .route("/api/stream", get(stream))
        .with_state(state)
}

/// Serves until `shutdown` resolves. Also drives the real-time ticker.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let ticker = spawn_ticker(Arc::clone(&state));
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    ticker.abort();
    result
}

pub fn spawn_ticker(state: Shared) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(TICK);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            interval.tick().await;
            state.tick();
        }
    })
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    path: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        ApiError { status, message: message.to_string(), path: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(path) = self.path {
            body["path"] = path.into();
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::UnknownDevice(_) | ModelError::UnknownSensor { .. } => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e)
    }
}

impl From<PersistError> for ApiError {
    fn from(e: PersistError) -> Self {
        match e {
            PersistError::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e),
            PersistError::SchemaViolation { ref path, .. } => {
                let path = Some(path.clone());
                ApiError { path, ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e) }
            }
            PersistError::Invalid(ref v) => {
                let path = v.first().map(|v| v.path.clone());
                ApiError { path, ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e) }
            }
            PersistError::UnsupportedVersion(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e),
        }
    }
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn get_project(State(state): State<Shared>) -> Result<Response, ApiError> {
    let text = persistence::to_canonical_json(state.lock().sim.project())?;
    Ok(json_text(text))
}

/// Replaces the project. The engine restarts, paused at virtual zero.
async fn put_project(State(state): State<Shared>, body: String) -> Result<Response, ApiError> {
    let project = persistence::from_json(&body)?;
    let sim = Simulator::with_mode(project, ClockMode::RealTime { speed: state.speed })
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let mut engine = state.lock();
    *engine = Engine { sim, pacer: None };
    let text = persistence::to_canonical_json(engine.sim.project())?;
    Ok(json_text(text))
}

/// Writes the current project back to the file it was loaded from.
async fn save_project(State(state): State<Shared>) -> Result<Json<Value>, ApiError> {
    let Some(path) = state.project_path.clone() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "project was not loaded from a file"));
    };
    let project = state.lock().sim.project().clone();
    persistence::save_project(&project, &path)?;
    Ok(Json(json!({ "saved": path })))
}

async fn device_status(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let status = state.lock().sim.get_status(&DeviceId::new(id))?;
    Ok(Json(status).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetSensorBody {
    /// Text form (`"On"`, `"21.5"`, `"1.5,2"`), a bare number, or a typed
    /// value such as `{"position": {"x": 1, "y": 2}}`.
    value: Value,
}

async fn set_sensor(
    State(state): State<Shared>,
    Path((id, sid)): Path<(String, String)>,
    Json(body): Json<SetSensorBody>,
) -> Result<Response, ApiError> {
    let device = DeviceId::new(id);
    let sensor = SensorId::new(sid);
    let mut engine = state.lock();
    let format = engine.sim.project().house.sensor_format(&device, &sensor)?.clone();
    let parsed = match body.value {
        Value::String(text) => SensorValue::parse_text(&format, &text).map_err(|v| (v.0, text)),
        Value::Number(n) => SensorValue::parse_text(&format, &n.to_string()).map_err(|v| (v.0, n.to_string())),
        other => {
            let text = other.to_string();
            serde_json::from_value(other).map_err(|e| (e.to_string(), text))
        }
    };
    let entry = match parsed {
        Ok(value) => engine.sim.apply_now(TaskAction { device, sensor, value }, Provenance::Manual),
        Err((reason, raw)) => {
            let err = ModelError::InvalidValue { device: device.clone(), sensor: sensor.clone(), reason };
            let action = TaskAction { device, sensor, value: SensorValue::State(raw) };
            engine.sim.reject_now(action, Provenance::Manual, err.to_string())
        }
    };
    state.publish(&mut engine);
    let status = match entry.outcome {
        Outcome::Applied => StatusCode::OK,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    Ok((status, Json(entry)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnabledBody {
    enabled: bool,
}

async fn set_enabled(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<EnabledBody>,
) -> Result<Json<Value>, ApiError> {
    let scenario = ScenarioId::new(id);
    let mut engine = state.lock();
    let now = engine.sim.now();
    engine
        .sim
        .set_enabled(&scenario, body.enabled, now)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e))?;
    state.publish(&mut engine);
    Ok(Json(json!({ "scenario": scenario, "enabled": body.enabled, "at": now })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RunAction {
    Run,
    Pause,
    Step,
    Until,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBody {
    action: RunAction,
    /// For `until`: virtual milliseconds, a duration string or a UTC datetime.
    #[serde(default)]
    t: Option<Value>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    state: RunState,
    now: SimTime,
    /// Events processed by this request.
    events: Vec<LogEntry>,
}

fn report(engine: &Engine, events: Vec<LogEntry>) -> RunReport {
    let state = if engine.pacer.is_some() { RunState::Running } else { RunState::Paused };
    RunReport { state, now: engine.sim.now(), events }
}

async fn run_state(State(state): State<Shared>) -> Json<RunReport> {
    Json(report(&state.lock(), Vec::new()))
}

async fn run_control(State(state): State<Shared>, Json(body): Json<RunBody>) -> Result<Json<RunReport>, ApiError> {
    let mut engine = state.lock();
    let events = match body.action {
        RunAction::Run => {
            if engine.pacer.is_none() {
                let now = engine.sim.now();
                engine.pacer = Some(Pacer::new(ClockMode::RealTime { speed: state.speed }, now));
            }
            Vec::new()
        }
        RunAction::Pause => {
            engine.pacer = None;
            Vec::new()
        }
        RunAction::Step => engine.sim.step().into_iter().collect(),
        RunAction::Until => {
            let epoch = engine.sim.project().epoch;
            let t = until_target(body.t.as_ref(), epoch)?;
            engine.sim.run_until(t).map_err(|e| ApiError::new(StatusCode::CONFLICT, e))?.to_vec()
        }
    };
    // a running clock continues from wherever step/until left it
    let now = engine.sim.now();
    if let Some(p) = engine.pacer.as_mut() {
        p.reanchor(now);
    }
    debug!("run {:?} -> {}", body.action, engine.sim.now());
    state.publish(&mut engine);
    Ok(Json(report(&engine, events)))
}

fn until_target(t: Option<&Value>, epoch: smarthouse_core::time::WallTime) -> Result<SimTime, ApiError> {
    let bad = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m);
    match t {
        Some(Value::Number(n)) => n.as_u64().map(SimTime).ok_or_else(|| bad(format!("`{n}` is not a virtual time in ms"))),
        Some(Value::String(s)) => s.parse::<Horizon>().and_then(|h| h.resolve(epoch)).map_err(bad),
        Some(other) => Err(bad(format!("`{other}` is not a time"))),
        None => Err(bad("`until` needs `t`".into())),
    }
}

async fn stream(State(state): State<Shared>) -> Response {
    let rx = state.stream.subscribe();
    let lines = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(line) => return Some((Ok::<_, Infallible>(format!("{line}\n")), rx)),
                Err(broadcast::error::RecvError::Lagged(n)) => warn!("stream subscriber lagged by {n} records"),
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    ([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(lines)).into_response()
}
