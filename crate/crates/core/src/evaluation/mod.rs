//! Classification metrics and the per-dataset report bundle.

mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{accuracy, binary_f1, confusion, weighted_f1, weighted_f1_from, ConfusionMatrix};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("prediction length {1} differs from truth length {0}")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("invalid report: {0}")]
    Invalid(String),
    #[error("report CSV: {0}")]
    Csv(String),
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AllFeatures,
    Classical,
    Remote,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::AllFeatures => "all_features",
            Variant::Classical => "classical",
            Variant::Remote => "remote",
        }
    }

    fn parse(s: &str) -> Result<Self, ReportError> {
        match s {
            "all_features" => Ok(Variant::AllFeatures),
            "classical" => Ok(Variant::Classical),
            "remote" => Ok(Variant::Remote),
            other => Err(ReportError::Csv(format!("unknown variant {other:?}"))),
        }
    }
}

/// One row of the summary: a dataset evaluated with or without selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub variant: Variant,
    /// Solver label; empty for the all-features baseline.
    pub solver: String,
    pub original_features: usize,
    pub selected_features: usize,
    /// `None` when evaluation was skipped (empty subset).
    pub accuracy: Option<f64>,
    /// Support-weighted F1.
    pub f1: Option<f64>,
    pub binary_f1: Option<f64>,
    pub sampling_time_ms: Option<f64>,
    pub seed: u64,
    pub repeat: usize,
    pub evaluation_skipped: bool,
    pub selected: Vec<String>,
    pub split_fingerprint: String,
    pub config_hash: String,
}

impl EvaluationReport {
    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Invalid(m));
        if self.selected_features > self.original_features {
            return bad(format!(
                "selected_features {} exceeds original_features {}",
                self.selected_features, self.original_features
            ));
        }
        if self.selected.len() != self.selected_features {
            return bad("selected names do not match selected_features".into());
        }
        match (self.variant, self.sampling_time_ms) {
            (Variant::AllFeatures, Some(_)) => {
                return bad("all_features rows carry no sampling time".into())
            }
            (Variant::Classical | Variant::Remote, None) => {
                return bad("solver rows need a sampling time".into())
            }
            (_, Some(t)) if !(t >= 0.0) => return bad(format!("sampling time {t}")),
            _ => {}
        }
        for (name, v) in [
            ("accuracy", self.accuracy),
            ("f1", self.f1),
            ("binary_f1", self.binary_f1),
        ] {
            match v {
                Some(x) if !(0.0..=1.0).contains(&x) => return bad(format!("{name} = {x}")),
                None if !self.evaluation_skipped => return bad(format!("{name} missing")),
                Some(_) if self.evaluation_skipped => {
                    return bad(format!("{name} present on a skipped row"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Column label used in the timing and markdown tables.
    pub fn label(&self) -> &str {
        match self.variant {
            Variant::AllFeatures => Variant::AllFeatures.as_str(),
            _ => &self.solver,
        }
    }
}

pub const CSV_COLUMNS: [&str; 16] = [
    "dataset",
    "variant",
    "original_features",
    "selected_features",
    "accuracy",
    "f1",
    "sampling_time_ms",
    "seed",
    "solver",
    "binary_f1",
    "repeat",
    "evaluation_skipped",
    "selected",
    "split_fingerprint",
    "config_hash",
    "schema",
];

const CSV_SCHEMA: &str = "1";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn parse_opt(s: &str, col: &str) -> Result<Option<f64>, ReportError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| ReportError::Csv(format!("{col}: {s:?} is not a number")))
}

fn parse_num<T: std::str::FromStr>(s: &str, col: &str) -> Result<T, ReportError> {
    s.parse()
        .map_err(|_| ReportError::Csv(format!("{col}: {s:?} is not a valid integer")))
}

pub fn to_csv(reports: &[EvaluationReport]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |err: csv::Error| ReportError::Csv(err.to_string());
    w.write_record(CSV_COLUMNS).map_err(e)?;
    for r in reports {
        w.write_record([
            r.dataset.clone(),
            r.variant.as_str().to_string(),
            r.original_features.to_string(),
            r.selected_features.to_string(),
            opt(r.accuracy),
            opt(r.f1),
            opt(r.sampling_time_ms),
            r.seed.to_string(),
            r.solver.clone(),
            opt(r.binary_f1),
            r.repeat.to_string(),
            r.evaluation_skipped.to_string(),
            serde_json::to_string(&r.selected)?,
            r.split_fingerprint.clone(),
            r.config_hash.clone(),
            CSV_SCHEMA.to_string(),
        ])
        .map_err(e)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|err| ReportError::Csv(err.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<EvaluationReport>, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| ReportError::Csv(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(ReportError::Csv("unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ReportError::Csv(e.to_string()))?;
        if rec.len() != CSV_COLUMNS.len() {
            return Err(ReportError::Csv(format!("row has {} fields", rec.len())));
        }
        let f = |i: usize| &rec[i];
        let selected_raw = f(12);
        let report = EvaluationReport {
            dataset: f(0).to_string(),
            variant: Variant::parse(f(1))?,
            original_features: parse_num(f(2), "original_features")?,
            selected_features: parse_num(f(3), "selected_features")?,
            accuracy: parse_opt(f(4), "accuracy")?,
            f1: parse_opt(f(5), "f1")?,
            sampling_time_ms: parse_opt(f(6), "sampling_time_ms")?,
            seed: parse_num(f(7), "seed")?,
            solver: f(8).to_string(),
            binary_f1: parse_opt(f(9), "binary_f1")?,
            repeat: parse_num(f(10), "repeat")?,
            evaluation_skipped: match f(11) {
                "true" => true,
                "false" => false,
                other => return Err(ReportError::Csv(format!("evaluation_skipped: {other:?}"))),
            },
            selected: serde_json::from_str(selected_raw)
                .map_err(|e| ReportError::Csv(format!("selected: {e}")))?,
            split_fingerprint: f(13).to_string(),
            config_hash: f(14).to_string(),
        };
        if f(15) != CSV_SCHEMA {
            return Err(ReportError::Csv(format!("unsupported schema {:?}", f(15))));
        }
        report.validate()?;
        out.push(report);
    }
    Ok(out)
}

/// Column labels in first-appearance order.
fn labels(reports: &[EvaluationReport], solvers_only: bool) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in reports {
        if solvers_only && r.variant == Variant::AllFeatures {
            continue;
        }
        if !out.iter().any(|l| l == r.label()) {
            out.push(r.label().to_string());
        }
    }
    out
}

fn datasets(reports: &[EvaluationReport]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in reports {
        if !out.contains(&r.dataset) {
            out.push(r.dataset.clone());
        }
    }
    out
}

/// Mean of `value` over repeats for each `(dataset, label)`.
fn cell_means(
    reports: &[EvaluationReport],
    value: impl Fn(&EvaluationReport) -> Option<f64>,
) -> BTreeMap<(String, String), f64> {
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in reports {
        if let Some(v) = value(r) {
            let e = acc
                .entry((r.dataset.clone(), r.label().to_string()))
                .or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// `dataset,<solver>,...` with one row per dataset and one sampling-time
/// column (ms) per solver, averaged over repeats.
pub fn timing_csv(reports: &[EvaluationReport]) -> String {
    let solvers = labels(reports, true);
    let means = cell_means(reports, |r| r.sampling_time_ms);
    let mut out = String::from("dataset");
    for s in &solvers {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for d in datasets(reports) {
        out.push_str(&d);
        for s in &solvers {
            out.push(',');
            if let Some(v) = means.get(&(d.clone(), s.clone())) {
                let _ = write!(out, "{v:?}");
            }
        }
        out.push('\n');
    }
    out
}

fn render_row(values: &[Option<f64>]) -> Vec<String> {
    let rendered: Vec<Option<String>> = values
        .iter()
        .map(|v| v.map(|x| format!("{x:.2}")))
        .collect();
    let best = rendered
        .iter()
        .flatten()
        .filter_map(|s| s.parse::<f64>().ok())
        .fold(f64::NEG_INFINITY, f64::max);
    rendered
        .into_iter()
        .map(|s| match s {
            Some(s) if s.parse::<f64>().ok() == Some(best) => format!("**{s}**"),
            Some(s) => s,
            None => "n/a".to_string(),
        })
        .collect()
}

/// Two tables: selected feature counts per solver, and accuracy / weighted
/// F1 per variant with the best value in each row (to 2 decimals) in bold.
pub fn markdown(reports: &[EvaluationReport]) -> String {
    let all = labels(reports, false);
    let solvers = labels(reports, true);
    let names = datasets(reports);
    let mut out = String::new();

    out.push_str("## Original vs. selected features\n\n| Dataset | Original |");
    for s in &solvers {
        let _ = write!(out, " {s} |");
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(solvers.len()));
    out.push('\n');
    let selected = cell_means(reports, |r| Some(r.selected_features as f64));
    for d in &names {
        let original = reports
            .iter()
            .find(|r| &r.dataset == d)
            .map(|r| r.original_features)
            .unwrap_or_default();
        let _ = write!(out, "| {d} | {original} |");
        for s in &solvers {
            match selected.get(&(d.clone(), s.clone())) {
                Some(v) if v.fract() == 0.0 => {
                    let _ = write!(out, " {v} |");
                }
                Some(v) => {
                    let _ = write!(out, " {v:.1} |");
                }
                None => out.push_str(" n/a |"),
            }
        }
        out.push('\n');
    }

    out.push_str("\n## Accuracy and F1\n\n| Dataset |");
    for l in &all {
        let _ = write!(out, " ACC {l} |");
    }
    for l in &all {
        let _ = write!(out, " F1 {l} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(2 * all.len()));
    out.push('\n');
    let acc = cell_means(reports, |r| r.accuracy);
    let f1 = cell_means(reports, |r| r.f1);
    for d in &names {
        let _ = write!(out, "| {d} |");
        for table in [&acc, &f1] {
            let row: Vec<Option<f64>> = all
                .iter()
                .map(|l| table.get(&(d.clone(), l.clone())).copied())
                .collect();
            for cell in render_row(&row) {
                let _ = write!(out, " {cell} |");
            }
        }
        out.push('\n');
    }
    out
}

/// Top-level `summary.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub run_id: String,
    pub created_unix_ms: u64,
    pub config_hash: String,
    pub reports: Vec<EvaluationReport>,
    /// Datasets or solver variants that failed; their rows are missing.
    #[serde(default)]
    pub failures: Vec<DatasetFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFailure {
    pub dataset: String,
    pub error: String,
}

/// Writes `summary.csv`, `summary.json`, `summary.md` and `timing.csv` into
/// `dir`, each atomically.
pub fn export(dir: &Path, summary: &Summary) -> Result<(), ReportError> {
    for r in &summary.reports {
        r.validate()?;
    }
    fs::create_dir_all(dir)?;
    let write = |name: &str, text: &str| crate::io::write_atomic(&dir.join(name), text.as_bytes());
    write("summary.csv", &to_csv(&summary.reports)?)?;
    write("summary.json", &serde_json::to_string_pretty(summary)?)?;
    write("summary.md", &markdown(&summary.reports))?;
    write("timing.csv", &timing_csv(&summary.reports))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(dataset: &str, variant: Variant, solver: &str, acc: f64, f1: f64) -> EvaluationReport {
        EvaluationReport {
            dataset: dataset.into(),
            variant,
            solver: solver.into(),
            original_features: 4,
            selected_features: if variant == Variant::AllFeatures {
                4
            } else {
                2
            },
            accuracy: Some(acc),
            f1: Some(f1),
            binary_f1: Some(f1),
            sampling_time_ms: (variant != Variant::AllFeatures).then_some(1.5),
            seed: 7,
            repeat: 0,
            evaluation_skipped: false,
            selected: if variant == Variant::AllFeatures {
                vec!["a".into(), "b".into(), "c".into(), "d".into()]
            } else {
                vec!["a".into(), "c".into()]
            },
            split_fingerprint: "abc".into(),
            config_hash: "h".into(),
        }
    }

    #[test]
    fn timing_layout() {
        let reports = vec![
            row("ds", Variant::AllFeatures, "", 0.8, 0.8),
            row("ds", Variant::Classical, "simulated_annealing", 0.8, 0.8),
            row("ds", Variant::Remote, "remote", 0.8, 0.8),
        ];
        let t = timing_csv(&reports);
        assert_eq!(t, "dataset,simulated_annealing,remote\nds,1.5,1.5\n");
    }

    #[test]
    fn selected_exceeding_original_rejected() {
        let mut r = row("ds", Variant::Classical, "x", 0.8, 0.8);
        r.selected_features = 5;
        assert!(r.validate().is_err());
    }

    #[test]
    fn sampling_time_presence_rule() {
        let mut r = row("ds", Variant::AllFeatures, "", 0.8, 0.8);
        r.sampling_time_ms = Some(1.0);
        assert!(r.validate().is_err());
        let mut r = row("ds", Variant::Classical, "x", 0.8, 0.8);
        r.sampling_time_ms = None;
        assert!(r.validate().is_err());
    }

    #[test]
    fn markdown_two_decimals_and_tied_bold() {
        let reports = vec![
            row("ds", Variant::AllFeatures, "", 0.8012, 0.7),
            row("ds", Variant::Classical, "sa", 0.7999, 0.6),
            row("ds", Variant::Remote, "remote", 0.75, 0.69),
        ];
        let md = markdown(&reports);
        assert!(
            md.contains("| ds | **0.80** | **0.80** | 0.75 | **0.70** | 0.60 | 0.69 |"),
            "{md}"
        );
        assert!(md.contains("| ds | 4 | 2 | 2 |"), "{md}");
    }

    #[test]
    fn skipped_rows_render_and_round_trip() {
        let mut r = row("ds", Variant::Classical, "sa", 0.0, 0.0);
        r.accuracy = None;
        r.f1 = None;
        r.binary_f1 = None;
        r.evaluation_skipped = true;
        r.selected_features = 0;
        r.selected.clear();
        r.validate().unwrap();
        let back = from_csv(&to_csv(std::slice::from_ref(&r)).unwrap()).unwrap();
        assert_eq!(back, vec![r.clone()]);
        assert!(markdown(&[r]).contains("n/a"));
    }

    #[test]
    fn export_writes_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let summary = Summary {
            schema_version: 1,
            run_id: "r".into(),
            created_unix_ms: 0,
            config_hash: "h".into(),
            reports: vec![row("ds", Variant::AllFeatures, "", 0.8, 0.8)],
            failures: vec![],
        };
        export(dir.path(), &summary).unwrap();
        for f in ["summary.csv", "summary.json", "summary.md", "timing.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let json = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let back: Summary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, summary);
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            acc in 0.0f64..=1.0, f1 in 0.0f64..=1.0, t in 0.0f64..1e6,
            seed in any::<u64>(), name in "[a-z_,;\" ]{1,12}"
        ) {
            let mut r = row(&name, Variant::Classical, "simulated_annealing", acc, f1);
            r.sampling_time_ms = Some(t);
            r.seed = seed;
            r.selected = vec![name.clone(), "x;y".into()];
            let reports = vec![row(&name, Variant::AllFeatures, "", acc, f1), r];
            prop_assert_eq!(from_csv(&to_csv(&reports).unwrap()).unwrap(), reports);
        }
    }
}
