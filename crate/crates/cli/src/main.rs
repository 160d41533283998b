use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mifs_core::config;
use mifs_core::pipeline;
use mifs_core::qubo::QuboProblem;
use mifs_core::remote::{LatencyModel, MockOptions, MockServer, RemoteConfig, RemoteSolver};
use mifs_core::solvers::{ExhaustiveSolver, SimulatedAnnealingSolver, Solver};
use mifs_core::synthetic::{SyntheticSpec, LABEL_NAME};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mifs",
    version,
    about = "Mutual-information QUBO feature selection for defect prediction"
)]
struct Cli {
    /// Log progress (repeat for debug output). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Name of the report directory; defaults to a timestamp.
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Check a config file without running anything.
    Validate { config: PathBuf },
    /// Write a seeded dataset with planted informative, duplicate and noise
    /// features.
    GenerateSynthetic {
        /// Output CSV path.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        informative: usize,
        #[arg(long, default_value_t = 5)]
        duplicates: usize,
        #[arg(long, default_value_t = 5)]
        noise: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Majority-to-minority ratio.
        #[arg(long, default_value_t = 4.0)]
        imbalance: f64,
        #[arg(long, default_value_t = 0.3)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the planted layout as JSON.
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Solve a QUBO given as JSON and print the result JSON.
    Solve {
        /// QUBO JSON file, or `-` for stdin.
        #[arg(default_value = "-")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverKind::SimulatedAnnealing)]
        solver: SolverKind,
        #[arg(long, default_value_t = 100)]
        num_reads: usize,
        #[arg(long, default_value_t = mifs_core::solvers::DEFAULT_SWEEPS)]
        sweeps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base URL of the solving service (for `--solver remote`).
        #[arg(long)]
        remote_url: Option<String>,
        /// Write the result here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Serve the mock solving service until interrupted.
    MockServer {
        #[arg(long, default_value_t = 8700)]
        port: u16,
        /// Seed of the backing simulated annealer.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Delay before every response.
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
        /// Require this bearer token.
        #[arg(long, env = config::TOKEN_ENV)]
        token: Option<String>,
        /// Concurrent solves.
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Exhaustive,
    SimulatedAnnealing,
    Remote,
}

/// Error carrying the exit code it should produce.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: e.into(),
    }
}

fn runtime_failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        error: e.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, run_id } => run(&config, run_id),
        Command::Validate { config } => validate(&config),
        Command::GenerateSynthetic {
            out,
            informative,
            duplicates,
            noise,
            samples,
            imbalance,
            separation,
            seed,
            layout,
        } => {
            let spec = SyntheticSpec {
                informative,
                duplicates,
                noise,
                samples,
                imbalance,
                separation,
                seed,
            };
            generate(&spec, &out, layout.as_deref())
        }
        Command::Solve {
            input,
            solver,
            num_reads,
            sweeps,
            seed,
            remote_url,
            out,
        } => solve(
            &input,
            solver,
            num_reads,
            sweeps,
            seed,
            remote_url,
            out.as_deref(),
        ),
        Command::MockServer {
            port,
            seed,
            latency_ms,
            token,
            workers,
        } => mock_server(port, seed, latency_ms, token, workers).map_err(runtime_failure),
    }
}

fn load_config(path: &Path) -> Result<config::LoadedConfig, Failure> {
    config::load(path).map_err(config_failure)
}

fn run(path: &Path, run_id: Option<String>) -> Result<(), Failure> {
    let loaded = load_config(path)?;
    let run_id = run_id.unwrap_or_else(pipeline::default_run_id);
    let outcome = pipeline::run(&loaded, &run_id).map_err(runtime_failure)?;
    println!("reports written to {}", outcome.report_dir.display());
    for f in &outcome.failures {
        eprintln!("{}: {}", f.dataset, f.error);
    }
    if !outcome.success() {
        return Err(runtime_failure(anyhow::anyhow!(
            "{} failure(s); see summary.json",
            outcome.failures.len()
        )));
    }
    Ok(())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let loaded = load_config(path)?;
    let c = &loaded.config;
    println!(
        "{}: ok ({} dataset(s), {} solver(s), config hash {})",
        path.display(),
        c.datasets.len(),
        c.solvers.len(),
        loaded.hash
    );
    Ok(())
}

fn generate(spec: &SyntheticSpec, out: &Path, layout_path: Option<&Path>) -> Result<(), Failure> {
    let (data, layout) = spec.generate().map_err(config_failure)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(runtime_failure)?;
    }
    let mut buf = Vec::new();
    data.write_csv(&mut buf, LABEL_NAME, ',')
        .map_err(runtime_failure)?;
    mifs_core::io::write_atomic(out, &buf)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(runtime_failure)?;
    if let Some(p) = layout_path {
        let json = serde_json::to_string_pretty(&layout).map_err(runtime_failure)?;
        mifs_core::io::write_atomic(p, json.as_bytes())
            .with_context(|| format!("writing {}", p.display()))
            .map_err(runtime_failure)?;
    }
    println!(
        "wrote {} rows x {} features to {}",
        data.n_samples(),
        data.n_features(),
        out.display()
    );
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn solve(
    input: &Path,
    kind: SolverKind,
    num_reads: usize,
    sweeps: usize,
    seed: u64,
    remote_url: Option<String>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let text = read_input(input).map_err(config_failure)?;
    let problem = QuboProblem::from_json(&text)
        .context("parsing QUBO JSON")
        .map_err(config_failure)?;
    let solver: Box<dyn Solver> = match kind {
        SolverKind::Exhaustive => Box::new(ExhaustiveSolver),
        SolverKind::SimulatedAnnealing => {
            let mut s = SimulatedAnnealingSolver::new(num_reads, seed);
            s.sweeps = sweeps;
            Box::new(s)
        }
        SolverKind::Remote => {
            let Some(url) = remote_url else {
                return Err(config_failure(anyhow::anyhow!(
                    "--solver remote needs --remote-url"
                )));
            };
            let mut cfg = RemoteConfig::new(url);
            cfg.num_reads = num_reads;
            cfg.auth_token = std::env::var(config::TOKEN_ENV)
                .ok()
                .filter(|t| !t.is_empty());
            Box::new(RemoteSolver::new(cfg).map_err(config_failure)?)
        }
    };
    let result = solver.solve(&problem).map_err(runtime_failure)?;
    let json = result.to_json_pretty();
    match out {
        Some(p) => mifs_core::io::write_atomic(p, json.as_bytes())
            .with_context(|| format!("writing {}", p.display()))
            .map_err(runtime_failure)?,
        None => {
            let mut stdout = io::stdout().lock();
            match writeln!(stdout, "{json}") {
                // the reader went away (e.g. `| head`); nothing left to report
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
                other => other.map_err(runtime_failure)?,
            }
        }
    }
    Ok(())
}

fn mock_server(
    port: u16,
    seed: u64,
    latency_ms: u64,
    token: Option<String>,
    workers: usize,
) -> Result<()> {
    if workers == 0 {
        bail!("--workers must be >= 1");
    }
    let mut opts = MockOptions::with_annealer(seed);
    opts.port = port;
    opts.workers = workers;
    opts.auth_token = token.filter(|t| !t.is_empty());
    if latency_ms > 0 {
        opts.latency = LatencyModel::Fixed(Duration::from_millis(latency_ms));
    }
    let server = MockServer::start(opts).with_context(|| format!("binding port {port}"))?;
    println!("mock solver service listening on {}", server.url());
    server.wait();
    Ok(())
}
