//! In-process HTTP mock of the solving service, for tests and demos.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::{oneshot, Semaphore};

use super::{JobResponse, JobStatus, SubmitRequest, SubmitResponse, MAX_REMOTE_VARIABLES};
use crate::qubo::QuboProblem;
use crate::solvers::{SimulatedAnnealingSolver, Solver, SolverError, SolverResult};

/// Solves a problem with the requested number of reads.
pub type BackingSolver =
    Arc<dyn Fn(&QuboProblem, usize) -> Result<SolverResult, SolverError> + Send + Sync>;

/// Delay applied before answering each request.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyModel {
    None,
    Fixed(Duration),
    /// The k-th request (submit or poll) waits `delays[k]`; the last entry
    /// repeats.
    PerRequest(Vec<Duration>),
}

#[derive(Clone)]
pub struct MockOptions {
    pub backing: BackingSolver,
    pub latency: LatencyModel,
    /// A job reports `running` until it has been polled this many times.
    pub ready_after_polls: usize,
    /// Added to the reported best energy, to simulate a dishonest server.
    pub tamper_energy: Option<f64>,
    /// Every job ends in `failed` with this message.
    pub fail_with: Option<String>,
    /// When set, requests must carry this bearer token.
    pub auth_token: Option<String>,
    /// Concurrent solves.
    pub workers: usize,
    /// `0` picks a free port.
    pub port: u16,
}

impl MockOptions {
    /// Backed by simulated annealing with `seed`; the request's `num_reads`
    /// overrides the solver's.
    pub fn with_annealer(seed: u64) -> Self {
        let backing: BackingSolver = Arc::new(move |problem, num_reads| {
            SimulatedAnnealingSolver::new(num_reads, seed).solve(problem)
        });
        Self {
            backing,
            latency: LatencyModel::None,
            ready_after_polls: 1,
            tamper_energy: None,
            fail_with: None,
            auth_token: None,
            workers: 4,
            port: 0,
        }
    }
}

enum JobState {
    Queued,
    Running,
    Done(SolverResult),
    Failed(String),
}

struct Job {
    submitted_at_unix_ms: u64,
    polls: usize,
    state: JobState,
}

struct Shared {
    options: MockOptions,
    jobs: Mutex<HashMap<String, Job>>,
    next_id: AtomicUsize,
    requests: AtomicUsize,
    submits: AtomicUsize,
    polls: AtomicUsize,
    pool: Arc<Semaphore>,
}

/// Running mock endpoint; shuts down when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(options: MockOptions) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(("127.0.0.1", options.port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            pool: Arc::new(Semaphore::new(options.workers.max(1))),
            options,
            jobs: Mutex::new(HashMap::new()),
            next_id: AtomicUsize::new(0),
            requests: AtomicUsize::new(0),
            submits: AtomicUsize::new(0),
            polls: AtomicUsize::new(0),
        });
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = Router::new()
            .route("/v1/jobs", post(submit))
            .route("/v1/jobs/{id}", get(poll))
            .with_state(shared.clone());
        let thread = std::thread::Builder::new()
            .name("mifs-mock".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener =
                        tokio::net::TcpListener::from_std(listener).expect("listener from std");
                    let _ = axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await;
                });
            })?;
        log::info!("mock solver service listening on http://{addr}");
        Ok(Self {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn submit_count(&self) -> usize {
        self.shared.submits.load(Ordering::SeqCst)
    }

    pub fn poll_count(&self) -> usize {
        self.shared.polls.load(Ordering::SeqCst)
    }

    /// Blocks until the server stops (it never does on its own).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn preamble(shared: &Shared, headers: &HeaderMap) -> Result<(), Response> {
    let k = shared.requests.fetch_add(1, Ordering::SeqCst);
    let delay = match &shared.options.latency {
        LatencyModel::None => None,
        LatencyModel::Fixed(d) => Some(*d),
        LatencyModel::PerRequest(ds) => ds.get(k).or(ds.last()).copied(),
    };
    if let Some(d) = delay {
        tokio::time::sleep(d).await;
    }
    if let Some(token) = &shared.options.auth_token {
        let expected = format!("Bearer {token}");
        let given = headers.get("authorization").and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return Err(error(
                StatusCode::UNAUTHORIZED,
                "missing or wrong bearer token",
            ));
        }
    }
    Ok(())
}

async fn submit(State(shared): State<Arc<Shared>>, headers: HeaderMap, body: String) -> Response {
    if let Err(r) = preamble(&shared, &headers).await {
        return r;
    }
    let req: SubmitRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid payload: {e}")),
    };
    if req.problem.n() > MAX_REMOTE_VARIABLES {
        return error(StatusCode::BAD_REQUEST, "problem too large");
    }
    if req.num_reads == 0 {
        return error(StatusCode::BAD_REQUEST, "num_reads must be >= 1");
    }
    shared.submits.fetch_add(1, Ordering::SeqCst);
    let id = format!("job-{:08}", shared.next_id.fetch_add(1, Ordering::SeqCst));
    shared.jobs.lock().expect("job table").insert(
        id.clone(),
        Job {
            submitted_at_unix_ms: now_ms(),
            polls: 0,
            state: JobState::Queued,
        },
    );

    let worker = shared.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let permit = worker
            .pool
            .clone()
            .acquire_owned()
            .await
            .expect("pool open");
        set_state(&worker, &job_id, JobState::Running);
        let options = worker.options.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let _permit = permit;
            if let Some(msg) = options.fail_with {
                return JobState::Failed(msg);
            }
            match (options.backing)(&req.problem, req.num_reads) {
                Ok(mut r) => {
                    if let Some(delta) = options.tamper_energy {
                        r.best_energy += delta;
                        if let Some(s) = r.samples.first_mut() {
                            s.energy += delta;
                        }
                    }
                    JobState::Done(r)
                }
                Err(e) => JobState::Failed(e.to_string()),
            }
        })
        .await
        .unwrap_or_else(|e| JobState::Failed(format!("worker panicked: {e}")));
        set_state(&worker, &job_id, outcome);
    });

    (StatusCode::CREATED, Json(SubmitResponse { job_id: id })).into_response()
}

fn set_state(shared: &Shared, id: &str, state: JobState) {
    if let Some(job) = shared.jobs.lock().expect("job table").get_mut(id) {
        job.state = state;
    }
}

async fn poll(
    State(shared): State<Arc<Shared>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Response {
    if let Err(r) = preamble(&shared, &headers).await {
        return r;
    }
    shared.polls.fetch_add(1, Ordering::SeqCst);
    let mut jobs = shared.jobs.lock().expect("job table");
    let Some(job) = jobs.get_mut(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown job {id}"));
    };
    job.polls += 1;
    let ready = job.polls >= shared.options.ready_after_polls;
    let (status, result, message) = match &job.state {
        JobState::Done(r) if ready => (JobStatus::Done, Some(r.clone()), None),
        JobState::Failed(m) if ready => (JobStatus::Failed, None, Some(m.clone())),
        JobState::Queued => (JobStatus::Queued, None, None),
        _ => (JobStatus::Running, None, None),
    };
    Json(JobResponse {
        job_id: id,
        status,
        submitted_at_unix_ms: job.submitted_at_unix_ms,
        result,
        message,
    })
    .into_response()
}
