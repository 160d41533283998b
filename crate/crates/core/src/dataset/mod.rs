//! Tabular defect datasets: loading, cleaning, balancing, splitting and
//! min-max scaling.

mod clean;
mod scale;
mod smote;
mod split;

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use clean::{clean, impute_missing};
pub use scale::{apply_scaler, fit_scaler, invert_scaler, ScalerParams};
pub use smote::{smote_balance, DEFAULT_SMOTE_K};
pub use split::{stratified_split, SplitPair};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("row {row}: label {value:?} is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("row {row}, column {column:?}: {value:?} is not numeric")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {got} fields, header has {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("dataset needs at least {needed} {what}, got {got}")]
    TooSmall {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("every feature column is constant")]
    AllConstant,
    #[error("class {0} has no samples")]
    MissingClass(u8),
    #[error("class {class} has {count} samples; cannot place at least one in each split")]
    InfeasibleStratum { class: u8, count: usize },
    #[error("test fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("feature count mismatch: expected {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub delimiter: char,
    /// Also accept `true/Y/yes/buggy` as 1 and `false/N/no/clean` as 0
    /// (case-insensitive).
    pub truthy_labels: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            truthy_labels: false,
        }
    }
}

/// Parsed but uncleaned table. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    pub labels: Vec<Option<u8>>,
    pub label_name: String,
}

impl RawTable {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }
}

fn parse_label(raw: &str, row: usize, opts: &LoadOptions) -> Result<Option<u8>, DataError> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if let Ok(v) = s.parse::<f64>() {
        if v == 0.0 {
            return Ok(Some(0));
        }
        if v == 1.0 {
            return Ok(Some(1));
        }
    } else if opts.truthy_labels {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "true" | "y" | "yes" | "buggy" => return Ok(Some(1)),
            "false" | "n" | "no" | "clean" => return Ok(Some(0)),
            _ => {}
        }
    }
    Err(DataError::BadLabel {
        row,
        value: s.to_string(),
    })
}

/// Parses delimited text with a header row.
pub fn load_csv_from_reader<R: Read>(
    reader: R,
    label: &LabelColumn,
    opts: &LoadOptions,
) -> Result<RawTable, DataError> {
    if !opts.delimiter.is_ascii() {
        return Err(DataError::Csv(format!(
            "delimiter {:?} must be a single ASCII character",
            opts.delimiter
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter as u8)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::Csv("missing header row".into()));
    }
    let label_idx = match label {
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingLabelColumn(name.clone()))?,
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => return Err(DataError::MissingLabelColumn(format!("#{i}"))),
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        if record.len() != header.len() {
            return Err(DataError::Ragged {
                row,
                expected: header.len(),
                got: record.len(),
            });
        }
        let mut values = Vec::with_capacity(feature_names.len());
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(parse_label(field, row, opts)?);
                continue;
            }
            let f = field.trim();
            if f.is_empty() {
                values.push(None);
            } else {
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => values.push(Some(v)),
                    _ => {
                        return Err(DataError::NonNumeric {
                            row,
                            column: header[col].clone(),
                            value: f.to_string(),
                        })
                    }
                }
            }
        }
        cells.push(values);
    }
    Ok(RawTable {
        feature_names,
        cells,
        labels,
        label_name: header[label_idx].clone(),
    })
}

pub fn load_csv(
    path: impl AsRef<Path>,
    label: &LabelColumn,
    opts: &LoadOptions,
) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv_from_reader(std::io::BufReader::new(file), label, opts)
}

/// Complete numeric dataset with binary labels (0 = clean, 1 = buggy).
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDataset {
    feature_names: Vec<String>,
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
}

impl CleanDataset {
    pub fn new(
        feature_names: Vec<String>,
        x: Vec<Vec<f64>>,
        y: Vec<u8>,
    ) -> Result<Self, DataError> {
        if x.len() != y.len() {
            return Err(DataError::Inconsistent(format!(
                "{} rows but {} labels",
                x.len(),
                y.len()
            )));
        }
        let n = feature_names.len();
        if let Some((i, row)) = x.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(DataError::Inconsistent(format!(
                "row {i} has {} values, expected {n}",
                row.len()
            )));
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(DataError::Inconsistent(format!(
                "label {} at row {i}",
                y[i]
            )));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::Inconsistent("non-finite feature value".into()));
        }
        Ok(Self {
            feature_names,
            x,
            y,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }

    /// `[count of class 0, count of class 1]`
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&v| v == 1).count();
        [self.y.len() - ones, ones]
    }

    pub fn rows_of_class(&self, class: u8) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i] == class).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset_rows(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Keeps only the columns at `indices`, in that order.
    pub fn select_features(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: indices
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            x: self
                .x
                .iter()
                .map(|r| indices.iter().map(|&j| r[j]).collect())
                .collect(),
            y: self.y.clone(),
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<Vec<f64>>, Vec<u8>) {
        (self.feature_names, self.x, self.y)
    }

    /// SHA-256 over names, values (bit patterns) and labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
        }
        for (row, &label) in self.x.iter().zip(&self.y) {
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update([label]);
        }
        crate::seed::hex(&h.finalize())
    }

    /// Writes the dataset with the label as the last column. Values use the
    /// shortest round-tripping decimal form.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        label_name: &str,
        delimiter: char,
    ) -> Result<(), DataError> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter as u8)
            .from_writer(writer);
        let csv_err = |e: csv::Error| DataError::Csv(e.to_string());
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_name);
        w.write_record(&header).map_err(csv_err)?;
        for (row, label) in self.x.iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DataError::Csv(e.to_string()))?;
        Ok(())
    }
}
