//! Client for a remote QUBO-solving service, plus an in-process mock of it.
//!
//! Protocol:
//!
//! - `POST /v1/jobs` with `{problem: {n, linear, quadratic}, num_reads}`;
//!   `201` answers `{job_id}`.
//! - `GET /v1/jobs/{id}` answers `{job_id, status, submitted_at_unix_ms,
//!   result?, message?}` where `status` is `queued | running | done |
//!   failed` and `result` is the solver-result JSON.
//! - Optional `Authorization: Bearer <token>`.
//!
//! Collected results are never trusted: the best energy is recomputed
//! locally before a result is returned.

mod mock;

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::QuboProblem;
use crate::solvers::{Solver, SolverError, SolverResult};

pub use mock::{BackingSolver, LatencyModel, MockOptions, MockServer};

/// Largest problem the protocol accepts.
pub const MAX_REMOTE_VARIABLES: usize = 4096;

/// Tolerance when checking a remote best energy against local recomputation.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

/// Transport attempts per poll request; submissions are never retried.
const POLL_ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("invalid remote config: {0}")]
    InvalidConfig(String),
    #[error("problem has {0} variables, the remote limit is {MAX_REMOTE_VARIABLES}")]
    TooLarge(usize),
    #[error("server rejected payload (HTTP {status}): {message}")]
    Payload { status: u16, message: String },
    #[error("authorization rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("server error (HTTP {status}): {message}")]
    Server { status: u16, message: String },
    #[error(
        "transport error for {url} after {attempts} attempt(s) (retryable: {retryable}): {message}"
    )]
    Transport {
        url: String,
        attempts: u32,
        retryable: bool,
        message: String,
    },
    #[error("job {job_id} did not finish within {waited_ms} ms ({polls} polls)")]
    Timeout {
        job_id: String,
        waited_ms: u64,
        polls: usize,
    },
    #[error("job {job_id} failed: {message}")]
    Failed { job_id: String, message: String },
    #[error("untrusted result: {0}")]
    Untrusted(String),
    #[error("malformed response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    #[serde(default)]
    pub auth_token: Option<String>,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_num_reads")]
    pub num_reads: usize,
}

fn default_poll_interval() -> u64 {
    50
}

fn default_timeout() -> u64 {
    60_000
}

fn default_num_reads() -> usize {
    100
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            auth_token: None,
            poll_interval_ms: default_poll_interval(),
            timeout_ms: default_timeout(),
            num_reads: default_num_reads(),
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        let bad = |m: String| Err(RemoteError::InvalidConfig(m));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad(format!(
                "base_url {:?} is not an http(s) URL",
                self.base_url
            ));
        }
        if self.poll_interval_ms == 0 {
            return bad("poll_interval_ms must be > 0".into());
        }
        if self.timeout_ms <= self.poll_interval_ms {
            return bad(format!(
                "timeout_ms ({}) must exceed poll_interval_ms ({})",
                self.timeout_ms, self.poll_interval_ms
            ));
        }
        if self.num_reads == 0 {
            return bad("num_reads must be >= 1".into());
        }
        Ok(())
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteJob {
    pub job_id: String,
    pub status: JobStatus,
    pub submitted_at_unix_ms: u64,
    pub result: Option<SolverResult>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub problem: QuboProblem,
    pub num_reads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobResponse {
    pub job_id: String,
    pub status: JobStatus,
    pub submitted_at_unix_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SolverResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl TryFrom<JobResponse> for RemoteJob {
    type Error = RemoteError;

    fn try_from(r: JobResponse) -> Result<Self, RemoteError> {
        if r.result.is_some() != (r.status == JobStatus::Done) {
            return Err(RemoteError::Decode(format!(
                "job {} has status {:?} but result present = {}",
                r.job_id,
                r.status,
                r.result.is_some()
            )));
        }
        Ok(RemoteJob {
            job_id: r.job_id,
            status: r.status,
            submitted_at_unix_ms: r.submitted_at_unix_ms,
            result: r.result,
            message: r.message,
        })
    }
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

/// Blocking HTTP client. Cheap to clone; safe to share across threads.
#[derive(Clone)]
pub struct RemoteClient {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient")
            .field("base_url", &self.config.base_url)
            .field("auth", &self.config.auth_token.is_some())
            .finish()
    }
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self, RemoteError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn auth<B>(&self, req: ureq::RequestBuilder<B>) -> ureq::RequestBuilder<B> {
        match &self.config.auth_token {
            Some(token) => req.header("Authorization", &format!("Bearer {token}")),
            None => req,
        }
    }

    fn transport(url: &str, attempts: u32, err: ureq::Error) -> RemoteError {
        let retryable = matches!(
            err,
            ureq::Error::Io(_)
                | ureq::Error::Timeout(_)
                | ureq::Error::HostNotFound
                | ureq::Error::ConnectionFailed
        );
        RemoteError::Transport {
            url: url.to_string(),
            attempts,
            retryable,
            message: err.to_string(),
        }
    }

    /// Maps a non-success status to the matching error.
    fn status_error(status: u16, body: &str) -> RemoteError {
        let message = serde_json::from_str::<ErrorBody>(body)
            .map(|b| b.error)
            .unwrap_or_else(|_| body.to_string());
        match status {
            401 | 403 => RemoteError::Auth { status },
            400..=499 => RemoteError::Payload { status, message },
            _ => RemoteError::Server { status, message },
        }
    }

    fn read(
        url: &str,
        attempts: u32,
        mut resp: ureq::http::Response<ureq::Body>,
    ) -> Result<(u16, String), RemoteError> {
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Self::transport(url, attempts, e))?;
        Ok((status, body))
    }

    /// Submits `problem` and returns the server-assigned job id.
    pub fn submit(&self, problem: &QuboProblem) -> Result<String, RemoteError> {
        if problem.n() > MAX_REMOTE_VARIABLES {
            return Err(RemoteError::TooLarge(problem.n()));
        }
        let body = serde_json::to_string(&SubmitRequest {
            problem: problem.clone(),
            num_reads: self.config.num_reads,
        })
        .map_err(|e| RemoteError::Decode(e.to_string()))?;
        self.submit_raw(&body)
    }

    /// Submits an already-serialized request body. Exposed so protocol
    /// validation on the server side can be exercised with bad payloads.
    pub fn submit_raw(&self, body: &str) -> Result<String, RemoteError> {
        let url = self.config.endpoint("/v1/jobs");
        let resp = self
            .auth(self.agent.post(&url))
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| Self::transport(&url, 1, e))?;
        let (status, text) = Self::read(&url, 1, resp)?;
        if status != 201 {
            return Err(Self::status_error(status, &text));
        }
        let r: SubmitResponse =
            serde_json::from_str(&text).map_err(|e| RemoteError::Decode(e.to_string()))?;
        if r.job_id.is_empty() {
            return Err(RemoteError::Decode("empty job_id".into()));
        }
        log::debug!("submitted job {}", r.job_id);
        Ok(r.job_id)
    }

    /// One status request, retrying transport failures a few times.
    pub fn poll_once(&self, job_id: &str) -> Result<RemoteJob, RemoteError> {
        let url = self.config.endpoint(&format!("/v1/jobs/{job_id}"));
        let mut attempt = 0;
        let resp = loop {
            attempt += 1;
            match self.auth(self.agent.get(&url)).call() {
                Ok(resp) => break resp,
                Err(e) => {
                    let err = Self::transport(&url, attempt, e);
                    let retry = matches!(
                        err,
                        RemoteError::Transport {
                            retryable: true,
                            ..
                        }
                    );
                    if !retry || attempt >= POLL_ATTEMPTS {
                        return Err(err);
                    }
                    log::warn!("{err}; retrying");
                    thread::sleep(Duration::from_millis(self.config.poll_interval_ms));
                }
            }
        };
        let (status, text) = Self::read(&url, attempt, resp)?;
        if status != 200 {
            return Err(Self::status_error(status, &text));
        }
        let r: JobResponse =
            serde_json::from_str(&text).map_err(|e| RemoteError::Decode(e.to_string()))?;
        if r.job_id != job_id {
            return Err(RemoteError::Decode(format!(
                "asked for job {job_id}, got {}",
                r.job_id
            )));
        }
        RemoteJob::try_from(r)
    }

    /// Polls until the job is done or failed, or the timeout elapses.
    pub fn poll(&self, job_id: &str) -> Result<RemoteJob, RemoteError> {
        let start = Instant::now();
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut polls = 0;
        loop {
            let job = self.poll_once(job_id)?;
            polls += 1;
            match job.status {
                JobStatus::Done => return Ok(job),
                JobStatus::Failed => {
                    return Err(RemoteError::Failed {
                        job_id: job_id.to_string(),
                        message: job.message.unwrap_or_default(),
                    })
                }
                JobStatus::Queued | JobStatus::Running => {}
            }
            let interval = Duration::from_millis(self.config.poll_interval_ms);
            if start.elapsed() + interval > timeout {
                return Err(RemoteError::Timeout {
                    job_id: job_id.to_string(),
                    waited_ms: start.elapsed().as_millis() as u64,
                    polls,
                });
            }
            thread::sleep(interval);
        }
    }

    /// Waits for the job and returns its result after checking it against
    /// `problem` locally.
    pub fn collect(
        &self,
        job_id: &str,
        problem: &QuboProblem,
    ) -> Result<SolverResult, RemoteError> {
        let job = self.poll(job_id)?;
        let result = job.result.expect("done jobs carry a result");
        result
            .verify(problem, ENERGY_TOLERANCE)
            .map_err(RemoteError::Untrusted)?;
        Ok(result)
    }

    pub fn solve(&self, problem: &QuboProblem) -> Result<SolverResult, RemoteError> {
        let job_id = self.submit(problem)?;
        self.collect(&job_id, problem)
    }
}

/// Adapts [`RemoteClient`] to the [`Solver`] trait. The reported sampling
/// time is the one measured by the server around its solve loop.
#[derive(Debug, Clone)]
pub struct RemoteSolver {
    client: RemoteClient,
}

impl RemoteSolver {
    pub const NAME: &'static str = "remote";

    pub fn new(config: RemoteConfig) -> Result<Self, RemoteError> {
        Ok(Self {
            client: RemoteClient::new(config)?,
        })
    }

    pub fn client(&self) -> &RemoteClient {
        &self.client
    }
}

impl Solver for RemoteSolver {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn solve(&self, problem: &QuboProblem) -> Result<SolverResult, SolverError> {
        let mut result = self
            .client
            .solve(problem)
            .map_err(|e| SolverError::Remote(e.to_string()))?;
        result.solver_name = Self::NAME.to_string();
        Ok(result)
    }
}
