use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn mifs(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mifs"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_synthetic_writes_csv_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = mifs(
        &[
            "generate-synthetic",
            "--out",
            "d/x.csv",
            "--layout",
            "d/x.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("d/x.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 21);
    assert_eq!(lines.count(), 1000);
    let layout: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d/x.json")).unwrap()).unwrap();
    assert_eq!(layout["duplicate_pairs"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_generator_spec_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mifs(
        &["generate-synthetic", "--out", "x.csv", "--imbalance", "0.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mifs(
        &["generate-synthetic", "--out", "a.csv", "--samples", "200"],
        dir.path()
    )
    .status
    .success());
    let good = "schema_version = 1\nseed = 1\n[[datasets]]\nname = \"a\"\npath = \"a.csv\"\n\
                label_column = \"defective\"\n[[solvers]]\nkind = \"exhaustive\"\n";
    fs::write(dir.path().join("good.toml"), good).unwrap();
    let o = mifs(&["validate", "good.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let bad = good.replace(
        "seed = 1\n",
        "seed = 1\n[weights]\nalpha = 0.5\nbeta = 0.4\n",
    );
    fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let o = mifs(&["validate", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("alpha + beta must equal 1"),
        "{}",
        stderr(&o)
    );

    assert_eq!(
        mifs(&["validate", "missing.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        mifs(&["run", "missing.toml"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn run_with_a_failing_dataset_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mifs(
        &["generate-synthetic", "--out", "a.csv", "--samples", "200"],
        dir.path()
    )
    .status
    .success());
    fs::write(dir.path().join("b.csv"), "x,defective\n1,0\n").unwrap();
    let cfg = "schema_version = 1\nseed = 1\n\
               [[datasets]]\nname = \"a\"\npath = \"a.csv\"\nlabel_column = \"defective\"\n\
               [[datasets]]\nname = \"b\"\npath = \"b.csv\"\nlabel_column = \"defective\"\n\
               [[solvers]]\nkind = \"simulated_annealing\"\nnum_reads = 10\n";
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let o = mifs(&["run", "run.toml", "--run-id", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let summary = fs::read_to_string(dir.path().join("reports/x/summary.json")).unwrap();
    assert!(summary.contains("\"failures\""));
}

const QUBO: &str =
    r#"{"n": 3, "linear": [[0, -1.0], [1, -1.0], [2, 0.5]], "quadratic": [[0, 1, 3.0]]}"#;

#[test]
fn solve_reads_stdin_and_prints_result() {
    let dir = tempfile::tempdir().unwrap();
    for solver in ["exhaustive", "simulated-annealing"] {
        let mut child = Command::new(env!("CARGO_BIN_EXE_mifs"))
            .args(["solve", "--solver", solver, "--num-reads", "10"])
            .current_dir(dir.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        child
            .stdin
            .take()
            .unwrap()
            .write_all(QUBO.as_bytes())
            .unwrap();
        let o = child.wait_with_output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["best_energy"], -1.0, "{v}");
        assert_eq!(v["best_bits"], serde_json::json!([1, 0, 0]));
    }
}

#[test]
fn solve_rejects_malformed_qubo() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("q.json"),
        r#"{"n": 2, "linear": [[5, 1.0]], "quadratic": []}"#,
    )
    .unwrap();
    let o = mifs(&["solve", "q.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = mifs(&["solve", "q.json", "--solver", "remote"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
