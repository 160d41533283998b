use std::time::{Duration, Instant};

use mifs_core::qubo::{QuboProblem, SubsetVector};
use mifs_core::remote::{
    JobStatus, LatencyModel, MockOptions, MockServer, RemoteClient, RemoteConfig, RemoteError,
    RemoteSolver,
};
use mifs_core::solvers::{SimulatedAnnealingSolver, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(n: usize, seed: u64) -> QuboProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let linear: Vec<_> = (0..n).map(|i| (i, -rng.random_range(0.0..1.0))).collect();
    let mut quadratic = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            quadratic.push(((i, j), rng.random_range(0.0..0.5)));
        }
    }
    QuboProblem::new(n, linear, quadratic).unwrap()
}

fn client(server: &MockServer) -> RemoteClient {
    let mut cfg = RemoteConfig::new(server.url());
    cfg.poll_interval_ms = 5;
    cfg.timeout_ms = 20_000;
    cfg.num_reads = 20;
    RemoteClient::new(cfg).unwrap()
}

#[test]
fn same_seed_matches_local_annealer() {
    let server = MockServer::start(MockOptions::with_annealer(42)).unwrap();
    let p = problem(12, 1);
    let remote = client(&server).solve(&p).unwrap();
    let local = SimulatedAnnealingSolver::new(20, 42).solve(&p).unwrap();
    assert_eq!(remote.best, local.best);
    assert_eq!(remote.best_energy, local.best_energy);
    assert_eq!(remote.samples, local.samples);
}

#[test]
fn job_id_non_empty_and_polls_observed() {
    let mut opts = MockOptions::with_annealer(1);
    opts.ready_after_polls = 2;
    let server = MockServer::start(opts).unwrap();
    let c = client(&server);
    let p = problem(4, 2);
    let id = c.submit(&p).unwrap();
    assert!(!id.is_empty());
    // let the solve finish so only the readiness rule gates completion
    std::thread::sleep(Duration::from_millis(200));
    c.collect(&id, &p).unwrap();
    assert_eq!(server.poll_count(), 2);
}

#[test]
fn polling_done_job_is_idempotent() {
    let server = MockServer::start(MockOptions::with_annealer(3)).unwrap();
    let c = client(&server);
    let p = problem(6, 3);
    let id = c.submit(&p).unwrap();
    let first = c.poll(&id).unwrap();
    let second = c.poll_once(&id).unwrap();
    assert_eq!(first.status, JobStatus::Done);
    assert_eq!(first, second);
}

#[test]
fn bad_quadratic_key_is_payload_error() {
    let server = MockServer::start(MockOptions::with_annealer(0)).unwrap();
    let body = r#"{"problem":{"n":3,"linear":[[0,-1.0]],"quadratic":[[2,1,0.5]]},"num_reads":4}"#;
    match client(&server).submit_raw(body) {
        Err(RemoteError::Payload { status: 400, .. }) => {}
        other => panic!("expected payload error, got {other:?}"),
    }
}

#[test]
fn unreachable_url_is_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let mut cfg = RemoteConfig::new(format!("http://127.0.0.1:{port}"));
    cfg.timeout_ms = 2_000;
    let c = RemoteClient::new(cfg).unwrap();
    match c.submit(&problem(3, 0)) {
        Err(RemoteError::Transport {
            attempts,
            retryable,
            ..
        }) => {
            assert_eq!(attempts, 1);
            assert!(retryable);
        }
        other => panic!("expected transport error, got {other:?}"),
    }
}

#[test]
fn tampered_energy_is_untrusted() {
    let mut opts = MockOptions::with_annealer(5);
    opts.tamper_energy = Some(0.01);
    let server = MockServer::start(opts).unwrap();
    assert!(matches!(
        client(&server).solve(&problem(8, 5)),
        Err(RemoteError::Untrusted(_))
    ));
}

#[test]
fn failed_job_carries_message_verbatim() {
    let mut opts = MockOptions::with_annealer(0);
    opts.fail_with = Some("device offline: maintenance window".into());
    let server = MockServer::start(opts).unwrap();
    match client(&server).solve(&problem(3, 0)) {
        Err(RemoteError::Failed { message, .. }) => {
            assert_eq!(message, "device offline: maintenance window")
        }
        other => panic!("expected failed job, got {other:?}"),
    }
}

#[test]
fn auth_token_required_when_configured() {
    let mut opts = MockOptions::with_annealer(0);
    opts.auth_token = Some("s3cret".into());
    let server = MockServer::start(opts).unwrap();
    let p = problem(3, 0);
    assert!(matches!(
        client(&server).submit(&p),
        Err(RemoteError::Auth { status: 401 })
    ));
    let mut cfg = client(&server).config().clone();
    cfg.auth_token = Some("s3cret".into());
    RemoteClient::new(cfg).unwrap().solve(&p).unwrap();
}

#[test]
fn concurrent_jobs_are_independent() {
    let server = MockServer::start(MockOptions::with_annealer(9)).unwrap();
    let c = client(&server);
    let (a, b) = (problem(10, 1), problem(10, 2));
    let ia = c.submit(&a).unwrap();
    let ib = c.submit(&b).unwrap();
    assert_ne!(ia, ib);
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| c.collect(&ia, &a).unwrap());
        let hb = s.spawn(|| c.collect(&ib, &b).unwrap());
        (ha.join().unwrap(), hb.join().unwrap())
    });
    assert_eq!(
        ra.best,
        SimulatedAnnealingSolver::new(20, 9).solve(&a).unwrap().best
    );
    assert_eq!(
        rb.best,
        SimulatedAnnealingSolver::new(20, 9).solve(&b).unwrap().best
    );
}

#[test]
fn latency_is_observed() {
    let mut opts = MockOptions::with_annealer(0);
    opts.latency = LatencyModel::Fixed(Duration::from_millis(50));
    let server = MockServer::start(opts).unwrap();
    let start = Instant::now();
    client(&server).solve(&problem(3, 0)).unwrap();
    assert!(start.elapsed() >= Duration::from_millis(50));
}

#[test]
fn timeout_when_job_never_ready() {
    let mut opts = MockOptions::with_annealer(0);
    opts.ready_after_polls = usize::MAX;
    let server = MockServer::start(opts).unwrap();
    let mut cfg = RemoteConfig::new(server.url());
    cfg.poll_interval_ms = 10;
    cfg.timeout_ms = 100;
    let c = RemoteClient::new(cfg).unwrap();
    assert!(matches!(
        c.solve(&problem(3, 0)),
        Err(RemoteError::Timeout { .. })
    ));
}

#[test]
fn remote_solver_trait_object() {
    let server = MockServer::start(MockOptions::with_annealer(4)).unwrap();
    let solver: Box<dyn Solver> =
        Box::new(RemoteSolver::new(client(&server).config().clone()).unwrap());
    let p = problem(5, 4);
    let r = solver.solve(&p).unwrap();
    assert_eq!(r.solver_name, "remote");
    assert_eq!(r.best.len(), 5);
    assert_ne!(r.best, SubsetVector::zeros(0));
}
