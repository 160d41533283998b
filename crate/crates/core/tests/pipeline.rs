use std::fs;
use std::path::Path;

use mifs_core::config::{self, ConfigError};
use mifs_core::evaluation::{self, Summary, Variant};
use mifs_core::pipeline;
use mifs_core::remote::{MockOptions, MockServer};
use mifs_core::synthetic::{SyntheticSpec, LABEL_NAME};

fn write_dataset(dir: &Path, name: &str, spec: &SyntheticSpec) {
    let (data, _) = spec.generate().unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf, LABEL_NAME, ',').unwrap();
    fs::write(dir.join(name), buf).unwrap();
}

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        informative: 4,
        duplicates: 2,
        noise: 2,
        samples: 300,
        seed,
        ..Default::default()
    }
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("schema_version = 1\nseed = 5\n{body}")).unwrap();
    path
}

const ONE_DATASET: &str =
    "[[datasets]]\nname = \"a\"\npath = \"a.csv\"\nlabel_column = \"defective\"\n";
const SA: &str = "[[solvers]]\nkind = \"simulated_annealing\"\nlabel = \"sa\"\nnum_reads = 20\n";

#[test]
fn run_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(1));
    let server = MockServer::start(MockOptions::with_annealer(3)).unwrap();
    let body = format!(
        "{ONE_DATASET}[[solvers]]\nkind = \"exhaustive\"\n\
         {SA}[[solvers]]\nkind = \"remote\"\nbase_url = \"{}\"\npoll_interval_ms = 5\nnum_reads = 20\n",
        server.url()
    );
    let loaded = config::load(&write_config(dir.path(), &body)).unwrap();
    let out = pipeline::run(&loaded, "r").unwrap();
    assert!(out.success(), "{:?}", out.failures);
    let variants: Vec<_> = out.summary.reports.iter().map(|r| r.variant).collect();
    assert_eq!(
        variants,
        vec![
            Variant::AllFeatures,
            Variant::Classical,
            Variant::Classical,
            Variant::Remote
        ]
    );
    let fp = &out.summary.reports[0].split_fingerprint;
    assert!(out
        .summary
        .reports
        .iter()
        .all(|r| &r.split_fingerprint == fp));

    for f in ["summary.csv", "summary.json", "summary.md", "timing.csv"] {
        assert!(out.report_dir.join(f).is_file(), "{f} missing");
    }
    let ds = out.report_dir.join("datasets/a");
    for f in [
        "qubo.json",
        "mi.json",
        "all_features_model.json",
        "sa_result.json",
        "sa_model.json",
    ] {
        assert!(ds.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.report_dir.join("summary.csv")).unwrap();
    let rows = evaluation::from_csv(&csv).unwrap();
    assert_eq!(rows, out.summary.reports);
    let json: Summary =
        serde_json::from_str(&fs::read_to_string(out.report_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(json.reports, out.summary.reports);
}

#[test]
fn empty_selection_skips_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(2));
    // with alpha = 0 every selection only adds non-negative redundancy
    let body = format!("{ONE_DATASET}[weights]\nalpha = 0.0\nbeta = 1.0\n{SA}");
    let loaded = config::load(&write_config(dir.path(), &body)).unwrap();
    let out = pipeline::run(&loaded, "r").unwrap();
    let row = &out.summary.reports[1];
    assert_eq!(row.selected_features, 0);
    assert!(row.evaluation_skipped);
    assert_eq!(row.accuracy, None);
    assert!(!out.report_dir.join("datasets/a/sa_model.json").exists());
    let md = fs::read_to_string(out.report_dir.join("summary.md")).unwrap();
    assert!(md.contains("n/a"));
}

#[test]
fn unreadable_dataset_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(3));
    fs::write(dir.path().join("b.csv"), "x,defective\n1,0\n").unwrap();
    let body = format!(
        "{ONE_DATASET}[[datasets]]\nname = \"b\"\npath = \"b.csv\"\nlabel_column = \"defective\"\n{SA}"
    );
    let loaded = config::load(&write_config(dir.path(), &body)).unwrap();
    let out = pipeline::run(&loaded, "r").unwrap();
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].dataset, "b");
    assert_eq!(out.summary.reports.len(), 2);
    assert!(out.summary.reports.iter().all(|r| r.dataset == "a"));
}

#[test]
fn repeats_use_distinct_splits() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(4));
    let body = format!("repeats = 2\n{ONE_DATASET}{SA}");
    let loaded = config::load(&write_config(dir.path(), &body)).unwrap();
    let out = pipeline::run(&loaded, "r").unwrap();
    assert_eq!(out.summary.reports.len(), 4);
    assert_ne!(
        out.summary.reports[0].split_fingerprint,
        out.summary.reports[2].split_fingerprint
    );
    assert!(out
        .report_dir
        .join("datasets/a/sa_result_r1.json")
        .is_file());
}

#[test]
fn unreachable_remote_reports_failure_and_keeps_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(5));
    let body = format!(
        "{ONE_DATASET}{SA}[[solvers]]\nkind = \"remote\"\nbase_url = \"http://127.0.0.1:9\"\ntimeout_ms = 500\n"
    );
    let loaded = config::load(&write_config(dir.path(), &body)).unwrap();
    let out = pipeline::run(&loaded, "r").unwrap();
    assert_eq!(out.summary.reports.len(), 2);
    assert_eq!(out.failures.len(), 1);
    assert!(
        out.failures[0].error.contains("remote"),
        "{}",
        out.failures[0].error
    );
}

#[test]
fn invalid_configs_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(6));
    let cases = [
        (format!("{ONE_DATASET}[weights]\nalpha = 0.5\nbeta = 0.4\n{SA}"), "alpha + beta must equal 1"),
        (format!("[[datasets]]\nname = \"m\"\npath = \"missing.csv\"\nlabel_column = \"defective\"\n{SA}"), "file not found"),
        (format!("{ONE_DATASET}{SA}{SA}"), "duplicate solver label"),
        (format!("test_fraction = 1.5\n{ONE_DATASET}{SA}"), "test_fraction"),
    ];
    for (body, needle) in cases {
        match config::load(&write_config(dir.path(), &body)) {
            Err(e @ ConfigError::Invalid(_)) => assert!(e.to_string().contains(needle), "{e}"),
            other => panic!("expected diagnostics containing {needle:?}, got {other:?}"),
        }
    }
    let err = config::load(&write_config(dir.path(), "not = [valid")).unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
}

#[test]
fn config_hash_tracks_file_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "a.csv", &small_spec(7));
    let a = config::load(&write_config(dir.path(), &format!("{ONE_DATASET}{SA}"))).unwrap();
    let b = config::load(&write_config(dir.path(), &format!("{ONE_DATASET}{SA}\n"))).unwrap();
    assert_eq!(a.hash.len(), 16);
    assert_ne!(a.hash, b.hash);
}
