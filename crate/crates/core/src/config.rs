//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//! test_fraction = 0.2
//! mi_bins = 10
//! output_dir = "reports"
//!
//! [[datasets]]
//! name = "ant-1.7"
//! path = "data/ant-1.7.csv"      # relative to this file
//! label_column = "bug"           # or a zero-based index
//!
//! [smote]
//! enabled = true
//! k = 5
//! after_split = false
//!
//! [weights]
//! alpha = 0.98
//! beta = 0.02
//!
//! [[solvers]]
//! kind = "exhaustive"
//!
//! [[solvers]]
//! kind = "simulated_annealing"
//! num_reads = 100
//!
//! [[solvers]]
//! kind = "remote"
//! base_url = "http://127.0.0.1:8700"
//!
//! [svm]
//! c = 1.0
//! epochs = 200
//! ```
//!
//! The remote auth token may be supplied through `MIFS_REMOTE_TOKEN`, which
//! overrides any `auth_token` in the file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{LabelColumn, LoadOptions, DEFAULT_SMOTE_K};
use crate::mi::DEFAULT_BINS;
use crate::qubo::MiQuboWeights;
use crate::remote::{RemoteConfig, RemoteSolver};
use crate::solvers::{ExhaustiveSolver, SimulatedAnnealingSolver, Solver, DEFAULT_SWEEPS};
use crate::svm::SvmParams;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOKEN_ENV: &str = "MIFS_REMOTE_TOKEN";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

/// One failed static check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    pub label_column: LabelColumn,
    #[serde(default)]
    pub load: LoadOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub enabled: bool,
    pub k: usize,
    /// Balance only the training split instead of the whole dataset.
    pub after_split: bool,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            k: DEFAULT_SMOTE_K,
            after_split: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = MiQuboWeights::default();
        Self {
            alpha: w.alpha(),
            beta: w.beta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    Exhaustive {
        #[serde(default)]
        label: Option<String>,
    },
    SimulatedAnnealing {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_num_reads")]
        num_reads: usize,
        #[serde(default = "default_sweeps")]
        sweeps: usize,
        #[serde(default)]
        beta_start: Option<f64>,
        #[serde(default)]
        beta_end: Option<f64>,
    },
    Remote {
        #[serde(default)]
        label: Option<String>,
        #[serde(flatten)]
        remote: RemoteConfig,
    },
}

fn default_num_reads() -> usize {
    100
}

fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

impl SolverConfig {
    /// Name used in reports and artifact file names.
    pub fn label(&self) -> &str {
        match self {
            SolverConfig::Exhaustive { label } => {
                label.as_deref().unwrap_or(ExhaustiveSolver::NAME)
            }
            SolverConfig::SimulatedAnnealing { label, .. } => {
                label.as_deref().unwrap_or(SimulatedAnnealingSolver::NAME)
            }
            SolverConfig::Remote { label, .. } => label.as_deref().unwrap_or(RemoteSolver::NAME),
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, SolverConfig::Remote { .. })
    }

    /// Instantiates the solver with the given seed (ignored by solvers that
    /// take none).
    pub fn build(&self, seed: u64) -> Result<Box<dyn Solver>, String> {
        Ok(match self {
            SolverConfig::Exhaustive { .. } => Box::new(ExhaustiveSolver),
            SolverConfig::SimulatedAnnealing {
                num_reads,
                sweeps,
                beta_start,
                beta_end,
                ..
            } => {
                let mut s = SimulatedAnnealingSolver::new(*num_reads, seed);
                s.sweeps = *sweeps;
                if let (Some(a), Some(b)) = (beta_start, beta_end) {
                    s.beta_range = Some((*a, *b));
                }
                Box::new(s)
            }
            SolverConfig::Remote { remote, .. } => {
                Box::new(RemoteSolver::new(remote.clone()).map_err(|e| e.to_string())?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Fit min-max bounds on train and apply them to both splits.
    #[default]
    TrainFitted,
    /// Scale each split with its own bounds.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub datasets: Vec<DatasetEntry>,
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub smote: SmoteConfig,
    #[serde(default = "default_bins")]
    pub mi_bins: usize,
    #[serde(default)]
    pub weights: WeightsConfig,
    pub solvers: Vec<SolverConfig>,
    #[serde(default)]
    pub svm: SvmParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub scaling: Scaling,
    /// Independent repetitions with distinct derived seeds.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Datasets processed concurrently; 0 uses the number of CPUs.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub mi_cache_dir: Option<PathBuf>,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("reports")
}

fn default_repeats() -> usize {
    1
}

/// A parsed config plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    /// Hash of the config bytes.
    pub hash: String,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn weights(&self) -> Result<MiQuboWeights, String> {
        MiQuboWeights::new(self.weights.alpha, self.weights.beta).map_err(|e| e.to_string())
    }

    /// Every static check that does not need to read datasets, plus the
    /// existence of each dataset file.
    pub fn diagnostics(&self, base_dir: &Path) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.to_string(),
                message,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            push(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            );
        }
        if self.datasets.is_empty() {
            push("datasets", "at least one dataset is required".into());
        }
        for (i, d) in self.datasets.iter().enumerate() {
            if d.name.trim().is_empty() {
                push(&format!("datasets[{i}].name"), "must not be empty".into());
            }
            if d.name.contains(['/', '\\']) || d.name == "." || d.name == ".." {
                push(
                    &format!("datasets[{i}].name"),
                    format!("{:?} is not a valid directory name", d.name),
                );
            }
            let path = base_dir.join(&d.path);
            if !path.is_file() {
                push(
                    &format!("datasets[{i}].path"),
                    format!("file not found: {}", path.display()),
                );
            }
            if self.datasets[..i].iter().any(|e| e.name == d.name) {
                push(
                    &format!("datasets[{i}].name"),
                    format!("duplicate dataset name {:?}", d.name),
                );
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            push(
                "test_fraction",
                format!("{} must lie in (0, 1)", self.test_fraction),
            );
        }
        if self.smote.enabled && self.smote.k == 0 {
            push("smote.k", "must be >= 1".into());
        }
        if self.mi_bins < 2 {
            push("mi_bins", "must be >= 2".into());
        }
        let (a, b) = (self.weights.alpha, self.weights.beta);
        if let Err(e) = self.weights() {
            push(
                "weights",
                format!("alpha + beta must equal 1 (got {a} + {b} = {}): {e}", a + b),
            );
        }
        if self.solvers.is_empty() {
            push("solvers", "at least one solver is required".into());
        }
        for (i, s) in self.solvers.iter().enumerate() {
            let field = format!("solvers[{i}]");
            if self.solvers[..i].iter().any(|o| o.label() == s.label()) {
                push(
                    &field,
                    format!("duplicate solver label {:?}; set `label`", s.label()),
                );
            }
            if s.label() == crate::evaluation::Variant::AllFeatures.as_str() || s.label().is_empty()
            {
                push(&field, format!("label {:?} is reserved", s.label()));
            }
            match s {
                SolverConfig::SimulatedAnnealing {
                    num_reads,
                    sweeps,
                    beta_start,
                    beta_end,
                    ..
                } => {
                    if *num_reads == 0 {
                        push(&field, "num_reads must be >= 1".into());
                    }
                    if *sweeps == 0 {
                        push(&field, "sweeps must be >= 1".into());
                    }
                    match (beta_start, beta_end) {
                        (None, None) => {}
                        (Some(a), Some(b)) if *a > 0.0 && b >= a && b.is_finite() => {}
                        (Some(_), Some(_)) => {
                            push(&field, "need 0 < beta_start <= beta_end".into())
                        }
                        _ => push(
                            &field,
                            "beta_start and beta_end must be given together".into(),
                        ),
                    }
                }
                SolverConfig::Remote { remote, .. } => {
                    if let Err(e) = remote.validate() {
                        push(&field, e.to_string());
                    }
                }
                SolverConfig::Exhaustive { .. } => {}
            }
        }
        if !(self.svm.c > 0.0 && self.svm.c.is_finite()) {
            push("svm.c", "must be a positive number".into());
        }
        if self.svm.epochs == 0 {
            push("svm.epochs", "must be >= 1".into());
        }
        if self.repeats == 0 {
            push("repeats", "must be >= 1".into());
        }
        out
    }

    /// Replaces every remote `auth_token` with `token`.
    pub fn apply_token_override(&mut self, token: &str) {
        for s in &mut self.solvers {
            if let SolverConfig::Remote { remote, .. } = s {
                remote.auth_token = Some(token.to_string());
            }
        }
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    crate::seed::hex(&Sha256::digest(bytes))[..16].to_string()
}

/// Reads, parses and validates a config file; applies the token override
/// from the environment.
pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| ConfigError::Parse("config is not UTF-8".into()))?;
    let mut config = RunConfig::from_toml(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let diags = config.diagnostics(&base_dir);
    if !diags.is_empty() {
        return Err(ConfigError::Invalid(diags));
    }
    if let Ok(token) = std::env::var(TOKEN_ENV) {
        if !token.is_empty() {
            config.apply_token_override(&token);
        }
    }
    Ok(LoadedConfig {
        config,
        base_dir,
        hash: hash_bytes(&bytes),
    })
}
