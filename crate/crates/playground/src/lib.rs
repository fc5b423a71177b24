//! Asynchronous analysis jobs behind `POST /api/tasks` and
//! `GET /api/tasks/{id}`, plus the static UI bundle under `/`.
//!
//! At most `concurrency` jobs run at once; the rest wait in a bounded queue.
//! A job still running after `timeout` is cancelled and marked `timed_out`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use loopdmd_core::polyhedral::{Limits, ResourceError};
use loopdmd_core::report::{symbolic_report, Report};
use loopdmd_core::symbolic::{analyze_symbolic, SymbolicConfig, SymbolicError};
use loopdmd_core::{compile, Category, Diagnostic};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub concurrency: usize,
    pub timeout: Duration,
    /// Queued plus running jobs accepted before answering 429.
    pub queue_capacity: usize,
    pub retention: Duration,
    pub static_dir: Option<PathBuf>,
    /// Enumeration cap per binding.
    pub max_points: Option<u64>,
    /// Sleep at the start of every job. Only for load tests.
    pub job_delay: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            concurrency: 4,
            timeout: Duration::from_secs(30),
            queue_capacity: 256,
            retention: Duration::from_secs(600),
            static_dir: None,
            max_points: None,
            job_delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Queued,
    Running,
    Done,
    Failed,
    TimedOut,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed | TaskState::TimedOut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default = "one")]
    pub block_size: i64,
    #[serde(default = "one")]
    pub num_sets: i64,
}

fn one() -> i64 {
    1
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { block_size: 1, num_sets: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub source: String,
    #[serde(default)]
    pub config: TaskConfig,
}

/// What `GET /api/tasks/{id}` returns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub state: TaskState,
    pub config: TaskConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Vec<Diagnostic>>,
    /// Milliseconds since the Unix epoch.
    pub submitted_at: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
    #[serde(skip)]
    source: String,
    #[serde(skip)]
    finished: Option<Instant>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub queued: usize,
    pub running: usize,
    pub peak_running: usize,
}

struct Inner {
    config: ServiceConfig,
    tasks: Mutex<HashMap<String, Task>>,
    permits: Arc<Semaphore>,
    running: AtomicUsize,
    peak_running: AtomicUsize,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let permits = Arc::new(Semaphore::new(config.concurrency.max(1)));
        AppState {
            inner: Arc::new(Inner {
                config,
                tasks: Mutex::new(HashMap::new()),
                permits,
                running: AtomicUsize::new(0),
                peak_running: AtomicUsize::new(0),
            }),
        }
    }

    pub fn stats(&self) -> Stats {
        let tasks = self.inner.tasks.lock().unwrap();
        Stats {
            queued: tasks.values().filter(|t| t.state == TaskState::Queued).count(),
            running: self.inner.running.load(Ordering::SeqCst),
            peak_running: self.inner.peak_running.load(Ordering::SeqCst),
        }
    }

    pub fn task(&self, id: &str) -> Option<Task> {
        self.inner.tasks.lock().unwrap().get(id).cloned()
    }

    fn purge_expired(&self) {
        let retention = self.inner.config.retention;
        self.inner.tasks.lock().unwrap().retain(|_, t| t.finished.is_none_or(|f| f.elapsed() < retention));
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Task)) {
        if let Some(t) = self.inner.tasks.lock().unwrap().get_mut(id) {
            f(t);
        }
    }

    fn finish(&self, id: &str, state: TaskState, result: Option<Report>, error: Option<Vec<Diagnostic>>) {
        self.update(id, |t| {
            t.state = state;
            t.result = result;
            t.error = error;
            t.finished_at = Some(now_ms());
            t.finished = Some(Instant::now());
        });
    }

    /// Registers a task and starts its job. `None` when the queue is full.
    pub fn submit(&self, source: String, config: TaskConfig) -> Option<String> {
        self.purge_expired();
        let id = new_id();
        {
            let mut tasks = self.inner.tasks.lock().unwrap();
            let pending = tasks.values().filter(|t| !t.state.is_terminal()).count();
            if pending >= self.inner.config.queue_capacity {
                return None;
            }
            tasks.insert(
                id.clone(),
                Task {
                    id: id.clone(),
                    state: TaskState::Queued,
                    config,
                    result: None,
                    error: None,
                    submitted_at: now_ms(),
                    finished_at: None,
                    source,
                    finished: None,
                },
            );
        }
        tokio::spawn(self.clone().job(id.clone()));
        Some(id)
    }

    async fn job(self, id: String) {
        let permit = self.inner.permits.clone().acquire_owned().await.expect("semaphore is never closed");
        let Some(task) = self.task(&id) else { return };
        self.update(&id, |t| t.state = TaskState::Running);
        let now = self.inner.running.fetch_add(1, Ordering::SeqCst) + 1;
        self.inner.peak_running.fetch_max(now, Ordering::SeqCst);

        let cancel = Arc::new(AtomicBool::new(false));
        let cfg = &self.inner.config;
        let limits = Limits {
            cancel: Some(cancel.clone()),
            ..cfg.max_points.map_or_else(Limits::default, Limits::with_max_points)
        };
        let delay = cfg.job_delay;
        let work = async {
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
            let (source, config) = (task.source.clone(), task.config);
            tokio::task::spawn_blocking(move || run_analysis(&source, config, limits)).await
        };
        match tokio::time::timeout(cfg.timeout, work).await {
            Ok(Ok(Ok(report))) => self.finish(&id, TaskState::Done, Some(report), None),
            Ok(Ok(Err(diags))) => self.finish(&id, TaskState::Failed, None, Some(diags)),
            Ok(Err(join)) => {
                let msg = format!("analysis aborted: {join}");
                self.finish(&id, TaskState::Failed, None, Some(vec![Diagnostic::note(Category::Internal, msg)]));
            }
            Err(_) => {
                cancel.store(true, Ordering::SeqCst);
                let msg = format!("analysis exceeded {} s", cfg.timeout.as_secs_f64());
                self.finish(&id, TaskState::TimedOut, None, Some(vec![Diagnostic::note(Category::Timeout, msg)]));
            }
        }
        self.inner.running.fetch_sub(1, Ordering::SeqCst);
        drop(permit);
    }
}

fn run_analysis(source: &str, config: TaskConfig, limits: Limits) -> Result<Report, Vec<Diagnostic>> {
    let program = compile(source)?;
    let symbolic = SymbolicConfig { limits, ..SymbolicConfig::default() };
    analyze_symbolic(&program, config.block_size, config.num_sets, &symbolic)
        .map(|dist| symbolic_report(&dist, config.block_size, config.num_sets))
        .map_err(|e| {
            let category = match e {
                SymbolicError::Resource(ResourceError::Cancelled) => Category::Timeout,
                SymbolicError::Resource(_) => Category::Resource,
                _ => Category::NoClosedForm,
            };
            vec![Diagnostic::note(category, e.to_string())]
        })
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn new_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn submit(State(state): State<AppState>, body: Result<Json<SubmitRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    if req.config.block_size < 1 || req.config.num_sets < 1 {
        return error(StatusCode::BAD_REQUEST, "block_size and num_sets must be at least 1");
    }
    match state.submit(req.source, req.config) {
        Some(id) => (StatusCode::ACCEPTED, Json(json!({ "id": id }))).into_response(),
        None => error(StatusCode::TOO_MANY_REQUESTS, "job queue is full"),
    }
}

async fn poll(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    state.purge_expired();
    match state.task(&id) {
        Some(task) => Json(task).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown task"),
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new().route("/api/tasks", post(submit)).route("/api/tasks/{id}", get(poll));
    let api = match &state.inner.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}
