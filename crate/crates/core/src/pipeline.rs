//! End-to-end experiment: per dataset, clean, balance, split, scale,
//! estimate MI on the training split, build the QUBO, solve it with every
//! configured solver, and score each selected subset (and the full feature
//! set) with a linear SVM on the same test split.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{LoadedConfig, RunConfig, Scaling, SmoteConfig, SolverConfig};
use crate::dataset::{
    apply_scaler, clean, fit_scaler, load_csv, smote_balance, stratified_split, CleanDataset,
    DataError, SplitPair,
};
use crate::evaluation::{self, DatasetFailure, EvaluationReport, ReportError, Summary, Variant};
use crate::mi::{build_mi_statistics, MiCache, MiError, MiStatistics};
use crate::qubo::{build_mi_qubo, MiQuboWeights, QuboProblem};
use crate::seed;
use crate::solvers::{SolverError, SolverResult};
use crate::svm::{self, LinearSvmModel, SvmError, SvmParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mi(#[from] MiError),
    #[error("SVM: {0}")]
    Svm(#[from] SvmError),
    #[error("solver {label}: {source}")]
    Solver {
        label: String,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Preprocessing and QUBO construction settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub test_fraction: f64,
    pub smote: SmoteConfig,
    pub mi_bins: usize,
    pub weights: MiQuboWeights,
    pub scaling: Scaling,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            smote: SmoteConfig::default(),
            mi_bins: crate::mi::DEFAULT_BINS,
            weights: MiQuboWeights::default(),
            scaling: Scaling::TrainFitted,
        }
    }
}

impl PrepareOptions {
    pub fn from_config(c: &RunConfig) -> Result<Self, PipelineError> {
        Ok(Self {
            test_fraction: c.test_fraction,
            smote: c.smote.clone(),
            mi_bins: c.mi_bins,
            weights: c.weights().map_err(PipelineError::Config)?,
            scaling: c.scaling,
        })
    }
}

/// Child seeds for one `(dataset, repeat)`, each a stable hash of the master
/// seed and the stage name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub master: u64,
    pub smote: u64,
    pub split: u64,
    pub svm: u64,
    dataset_repeat: u64,
}

impl StageSeeds {
    pub fn new(master: u64, dataset: &str, repeat: usize) -> Self {
        let r = repeat.to_string();
        let stage = |s: &str| seed::derive_str(master, &[dataset, &r, s]);
        Self {
            master,
            smote: stage("smote"),
            split: stage("split"),
            svm: stage("svm"),
            dataset_repeat: stage("solvers"),
        }
    }

    pub fn solver(&self, label: &str) -> u64 {
        seed::derive_str(self.dataset_repeat, &[label])
    }
}

/// Scaled split, MI statistics and the QUBO built from them.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: SplitPair,
    pub mi: MiStatistics,
    pub qubo: QuboProblem,
}

impl Prepared {
    pub fn n_features(&self) -> usize {
        self.split.train.n_features()
    }

    pub fn fingerprint(&self) -> String {
        self.split.fingerprint()
    }
}

/// Balance, split and scale `data`, then estimate MI on the training split.
pub fn prepare(
    data: &CleanDataset,
    opts: &PrepareOptions,
    seeds: &StageSeeds,
    cache: Option<&MiCache>,
) -> Result<Prepared, PipelineError> {
    let balanced;
    let data = if opts.smote.enabled && !opts.smote.after_split {
        balanced = smote_balance(data, opts.smote.k, seeds.smote)?;
        &balanced
    } else {
        data
    };
    let mut split = stratified_split(data, opts.test_fraction, seeds.split)?;
    if opts.smote.enabled && opts.smote.after_split {
        split.train = smote_balance(&split.train, opts.smote.k, seeds.smote)?;
    }
    let train_params = fit_scaler(&split.train);
    let test_params = match opts.scaling {
        Scaling::TrainFitted => train_params.clone(),
        Scaling::Independent => fit_scaler(&split.test),
    };
    split.train = apply_scaler(&train_params, &split.train)?;
    split.test = apply_scaler(&test_params, &split.test)?;
    let mi = match cache {
        Some(c) => c.get_or_compute(&split.train, opts.mi_bins)?,
        None => build_mi_statistics(&split.train, opts.mi_bins)?,
    };
    let qubo = build_mi_qubo(&mi, opts.weights);
    Ok(Prepared { split, mi, qubo })
}

#[derive(Debug, Clone)]
pub struct SubsetEvaluation {
    pub model: LinearSvmModel,
    pub accuracy: f64,
    pub f1: f64,
    pub binary_f1: f64,
}

/// Trains on the selected columns of the training split and scores on the
/// same columns of the test split. `indices` must be non-empty.
pub fn evaluate_subset(
    split: &SplitPair,
    indices: &[usize],
    params: SvmParams,
    seed: u64,
) -> Result<SubsetEvaluation, PipelineError> {
    let train = split.train.select_features(indices);
    let test = split.test.select_features(indices);
    let model = svm::fit(train.x(), train.y(), params, seed)?
        .with_feature_names(train.feature_names().to_vec());
    let pred = model.predict(test.x())?;
    let cm = evaluation::confusion(test.y(), &pred)?;
    Ok(SubsetEvaluation {
        model,
        accuracy: evaluation::accuracy(&cm),
        f1: evaluation::weighted_f1_from(&cm),
        binary_f1: evaluation::binary_f1(test.y(), &pred)?,
    })
}

/// Files produced for one dataset and repeat, keyed by file name.
pub type Artifacts = Vec<(String, String)>;

#[derive(Debug)]
pub struct DatasetOutcome {
    pub reports: Vec<EvaluationReport>,
    pub artifacts: Artifacts,
    /// Solver failures; the remaining variants still produce rows.
    pub errors: Vec<String>,
}

/// Everything that varies per run but is shared by all datasets.
pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    pub prepare: PrepareOptions,
    pub config_hash: String,
    pub cache: Option<MiCache>,
}

fn variant_of(s: &SolverConfig) -> Variant {
    if s.is_remote() {
        Variant::Remote
    } else {
        Variant::Classical
    }
}

/// One dataset, one repeat: baseline plus every solver variant. Solvers run
/// sequentially so their timings do not contend with each other.
pub fn run_prepared(
    ctx: &RunContext<'_>,
    name: &str,
    repeat: usize,
    prepared: &Prepared,
    seeds: &StageSeeds,
) -> Result<DatasetOutcome, PipelineError> {
    let cfg = ctx.config;
    let n = prepared.n_features();
    let names = prepared.split.train.feature_names();
    let fingerprint = prepared.fingerprint();
    let suffix = if cfg.repeats > 1 {
        format!("_r{repeat}")
    } else {
        String::new()
    };
    let mut artifacts: Artifacts = vec![
        (format!("qubo{suffix}.json"), prepared.qubo.to_json()),
        (format!("mi{suffix}.json"), prepared.mi.to_json()),
    ];
    let row = |variant: Variant,
               solver: &str,
               selected: &[usize],
               eval: Option<&SubsetEvaluation>,
               time: Option<f64>| {
        EvaluationReport {
            dataset: name.to_string(),
            variant,
            solver: solver.to_string(),
            original_features: n,
            selected_features: selected.len(),
            accuracy: eval.map(|e| e.accuracy),
            f1: eval.map(|e| e.f1),
            binary_f1: eval.map(|e| e.binary_f1),
            sampling_time_ms: time,
            seed: cfg.seed,
            repeat,
            evaluation_skipped: eval.is_none(),
            selected: selected.iter().map(|&i| names[i].clone()).collect(),
            split_fingerprint: fingerprint.clone(),
            config_hash: ctx.config_hash.clone(),
        }
    };

    let all: Vec<usize> = (0..n).collect();
    let base = evaluate_subset(&prepared.split, &all, cfg.svm, seeds.svm)?;
    artifacts.push((
        format!("all_features_model{suffix}.json"),
        base.model.to_json(),
    ));
    let mut reports = vec![row(Variant::AllFeatures, "", &all, Some(&base), None)];
    let mut errors = Vec::new();

    for solver_cfg in &cfg.solvers {
        let label = solver_cfg.label();
        let result: Result<SolverResult, PipelineError> = solver_cfg
            .build(seeds.solver(label))
            .map_err(|e| PipelineError::Solver {
                label: label.to_string(),
                source: SolverError::Remote(e),
            })
            .and_then(|s| {
                s.solve(&prepared.qubo)
                    .map_err(|source| PipelineError::Solver {
                        label: label.to_string(),
                        source,
                    })
            });
        let result = match result {
            Ok(r) => r,
            Err(e) => {
                log::error!("{name}: {e}");
                errors.push(e.to_string());
                continue;
            }
        };
        artifacts.push((
            format!("{label}_result{suffix}.json"),
            result.to_json_pretty(),
        ));
        let selected = result.best.selected_indices();
        let eval = if selected.is_empty() {
            log::warn!("{name}: {label} selected no features; evaluation skipped");
            None
        } else {
            let e = evaluate_subset(&prepared.split, &selected, cfg.svm, seeds.svm)?;
            artifacts.push((format!("{label}_model{suffix}.json"), e.model.to_json()));
            Some(e)
        };
        reports.push(row(
            variant_of(solver_cfg),
            label,
            &selected,
            eval.as_ref(),
            Some(result.sampling_time_ms),
        ));
    }
    Ok(DatasetOutcome {
        reports,
        artifacts,
        errors,
    })
}

fn run_dataset(
    ctx: &RunContext<'_>,
    base_dir: &Path,
    index: usize,
) -> Result<DatasetOutcome, PipelineError> {
    let entry = &ctx.config.datasets[index];
    let raw = load_csv(base_dir.join(&entry.path), &entry.label_column, &entry.load)?;
    let data = clean(&raw)?;
    log::info!(
        "{}: {} rows, {} features after cleaning",
        entry.name,
        data.n_samples(),
        data.n_features()
    );
    let mut out = DatasetOutcome {
        reports: Vec::new(),
        artifacts: Vec::new(),
        errors: Vec::new(),
    };
    for repeat in 0..ctx.config.repeats {
        let seeds = StageSeeds::new(ctx.config.seed, &entry.name, repeat);
        let prepared = prepare(&data, &ctx.prepare, &seeds, ctx.cache.as_ref())?;
        let o = run_prepared(ctx, &entry.name, repeat, &prepared, &seeds)?;
        out.reports.extend(o.reports);
        out.artifacts.extend(o.artifacts);
        out.errors.extend(o.errors);
    }
    Ok(out)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub failures: Vec<DatasetFailure>,
    pub report_dir: PathBuf,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn default_run_id() -> String {
    let ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    format!("run-{ms}")
}

/// Runs every dataset on a bounded pool, isolating failures per dataset,
/// and writes the report bundle to `<output_dir>/<run_id>/`.
pub fn run(loaded: &LoadedConfig, run_id: &str) -> Result<RunOutcome, PipelineError> {
    let config = &loaded.config;
    if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
        return Err(PipelineError::Config(format!("invalid run id {run_id:?}")));
    }
    let ctx = RunContext {
        config,
        prepare: PrepareOptions::from_config(config)?,
        config_hash: loaded.hash.clone(),
        cache: config
            .mi_cache_dir
            .as_ref()
            .map(|d| MiCache::new(loaded.base_dir.join(d))),
    };
    let report_dir = loaded.base_dir.join(&config.output_dir).join(run_id);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<DatasetOutcome, PipelineError>> = pool.install(|| {
        (0..config.datasets.len())
            .into_par_iter()
            .map(|i| run_dataset(&ctx, &loaded.base_dir, i))
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (entry, outcome) in config.datasets.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                let dir = report_dir.join("datasets").join(&entry.name);
                fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                for (file, text) in &o.artifacts {
                    let path = dir.join(file);
                    crate::io::write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
                }
                failures.extend(o.errors.into_iter().map(|error| DatasetFailure {
                    dataset: entry.name.clone(),
                    error,
                }));
                reports.extend(o.reports);
            }
            Err(e) => {
                log::error!("{}: {e}", entry.name);
                failures.push(DatasetFailure {
                    dataset: entry.name.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let created_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let summary = Summary {
        schema_version: 1,
        run_id: run_id.to_string(),
        created_unix_ms,
        config_hash: loaded.hash.clone(),
        reports,
        failures: failures.clone(),
    };
    evaluation::export(&report_dir, &summary)?;
    Ok(RunOutcome {
        summary,
        failures,
        report_dir,
    })
}
