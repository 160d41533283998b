//! Histogram plug-in mutual information on `[0, 1]`-scaled features.
//!
//! Each feature is discretized into `bins` equal-width bins over `[0, 1]`;
//! the binary target is used as-is. Estimates are in nats, with no bias
//! correction. Empty cells contribute nothing.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::CleanDataset;

pub const DEFAULT_BINS: usize = 10;

/// Plug-in estimates may dip below zero by rounding; anything below this is a bug.
const NEGATIVE_SLACK: f64 = -1e-9;

#[derive(Debug, Error)]
pub enum MiError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least 2 samples required, got {0}")]
    TooFewSamples(usize),
    #[error("bins must be >= 2, got {0}")]
    TooFewBins(usize),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("label at sample {index} is {value}, expected 0 or 1")]
    BadLabel { index: usize, value: u8 },
    #[error("invalid MI statistics: {0}")]
    Invalid(String),
    #[error("MI cache I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("MI document: {0}")]
    Json(#[from] serde_json::Error),
}

fn check_bins(bins: usize) -> Result<(), MiError> {
    if bins < 2 {
        return Err(MiError::TooFewBins(bins));
    }
    Ok(())
}

/// Bin index of `v` among `bins` equal-width bins on `[0, 1]`; the right
/// edge belongs to the last bin and out-of-range values are clamped.
fn bin_of(v: f64, bins: usize) -> usize {
    let b = (v.clamp(0.0, 1.0) * bins as f64).floor() as usize;
    b.min(bins - 1)
}

fn discretize(x: &[f64], bins: usize) -> Result<Vec<usize>, MiError> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_finite() {
                Ok(bin_of(v, bins))
            } else {
                Err(MiError::NonFinite(i))
            }
        })
        .collect()
}

/// `Σ p(a,b) ln(p(a,b) / (p(a) p(b)))` from a joint count table.
fn mi_from_counts(joint: &[usize], rows: usize, cols: usize, total: usize) -> f64 {
    let mut row_sums = vec![0usize; rows];
    let mut col_sums = vec![0usize; cols];
    for a in 0..rows {
        for b in 0..cols {
            let c = joint[a * cols + b];
            row_sums[a] += c;
            col_sums[b] += c;
        }
    }
    let total = total as f64;
    let mut terms = Vec::new();
    for a in 0..rows {
        for b in 0..cols {
            let c = joint[a * cols + b];
            if c == 0 {
                continue;
            }
            let c = c as f64;
            // p(a,b) / (p(a) p(b)) = c * N / (r_a * c_b)
            terms.push((c / total) * (c * total / (row_sums[a] as f64 * col_sums[b] as f64)).ln());
        }
    }
    // Summing in value order makes the result independent of which variable
    // indexes the rows, so MI(a, b) == MI(b, a) bit for bit.
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    debug_assert!(mi >= NEGATIVE_SLACK, "plug-in MI went negative: {mi}");
    mi.max(0.0)
}

fn mi_of_codes(a: &[usize], a_levels: usize, b: &[usize], b_levels: usize) -> f64 {
    let mut joint = vec![0usize; a_levels * b_levels];
    for (&ai, &bi) in a.iter().zip(b) {
        joint[ai * b_levels + bi] += 1;
    }
    mi_from_counts(&joint, a_levels, b_levels, a.len())
}

fn check_lengths(left: usize, right: usize) -> Result<(), MiError> {
    if left != right {
        return Err(MiError::LengthMismatch { left, right });
    }
    if left < 2 {
        return Err(MiError::TooFewSamples(left));
    }
    Ok(())
}

fn label_codes(y: &[u8]) -> Result<Vec<usize>, MiError> {
    y.iter()
        .enumerate()
        .map(|(index, &value)| match value {
            0 | 1 => Ok(value as usize),
            _ => Err(MiError::BadLabel { index, value }),
        })
        .collect()
}

/// MI between a `[0, 1]` feature column and a binary target.
pub fn estimate_mi_feature_target(x: &[f64], y: &[u8], bins: usize) -> Result<f64, MiError> {
    check_bins(bins)?;
    check_lengths(x.len(), y.len())?;
    let xb = discretize(x, bins)?;
    let yb = label_codes(y)?;
    Ok(mi_of_codes(&xb, bins, &yb, 2))
}

/// MI between two `[0, 1]` feature columns, both binned.
pub fn estimate_mi_feature_pair(xi: &[f64], xj: &[f64], bins: usize) -> Result<f64, MiError> {
    check_bins(bins)?;
    check_lengths(xi.len(), xj.len())?;
    let a = discretize(xi, bins)?;
    let b = discretize(xj, bins)?;
    Ok(mi_of_codes(&a, bins, &b, bins))
}

/// Entropy (nats) of the equal-width histogram of `x`.
pub fn binned_entropy(x: &[f64], bins: usize) -> Result<f64, MiError> {
    check_bins(bins)?;
    let codes = discretize(x, bins)?;
    let mut counts = vec![0usize; bins];
    for c in codes {
        counts[c] += 1;
    }
    let n = x.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// Relevance of every feature to the target and redundancy between every
/// feature pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MiStatistics {
    target_mi: Vec<f64>,
    pair_mi: Vec<Vec<f64>>,
}

impl MiStatistics {
    /// `pair_mi` must be a symmetric square matrix; its diagonal is ignored
    /// and stored as zero.
    pub fn new(target_mi: Vec<f64>, mut pair_mi: Vec<Vec<f64>>) -> Result<Self, MiError> {
        let n = target_mi.len();
        if pair_mi.len() != n || pair_mi.iter().any(|row| row.len() != n) {
            return Err(MiError::Invalid(format!("pair matrix must be {n}x{n}")));
        }
        for (i, &v) in target_mi.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(MiError::Invalid(format!("target_mi[{i}] = {v}")));
            }
        }
        for i in 0..n {
            pair_mi[i][i] = 0.0;
            for j in 0..n {
                let v = pair_mi[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(MiError::Invalid(format!("pair_mi[{i}][{j}] = {v}")));
                }
                if v != pair_mi[j][i] {
                    return Err(MiError::Invalid(format!(
                        "pair_mi not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { target_mi, pair_mi })
    }

    pub fn n(&self) -> usize {
        self.target_mi.len()
    }

    pub fn target_mi(&self) -> &[f64] {
        &self.target_mi
    }

    pub fn pair_mi(&self) -> &[Vec<f64>] {
        &self.pair_mi
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pair_mi[i][j]
    }

    pub fn to_doc(&self) -> MiDocument {
        let n = self.n();
        MiDocument {
            n,
            target_mi: self.target_mi.clone(),
            pair_mi: (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| self.pair_mi[i][j])
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("MI serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, MiError> {
        let doc: MiDocument = serde_json::from_str(text)?;
        Self::try_from(doc)
    }
}

/// Cached form: `pair_mi` holds the strict upper triangle in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiDocument {
    pub n: usize,
    pub target_mi: Vec<f64>,
    pub pair_mi: Vec<f64>,
}

impl TryFrom<MiDocument> for MiStatistics {
    type Error = MiError;

    fn try_from(doc: MiDocument) -> Result<Self, MiError> {
        let n = doc.n;
        if doc.target_mi.len() != n {
            return Err(MiError::Invalid(format!(
                "target_mi has {} entries, expected {n}",
                doc.target_mi.len()
            )));
        }
        let expected = n * n.saturating_sub(1) / 2;
        if doc.pair_mi.len() != expected {
            return Err(MiError::Invalid(format!(
                "pair_mi has {} entries, expected {expected}",
                doc.pair_mi.len()
            )));
        }
        let mut pair = vec![vec![0.0; n]; n];
        let mut it = doc.pair_mi.into_iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = it.next().expect("length checked above");
                pair[i][j] = v;
                pair[j][i] = v;
            }
        }
        MiStatistics::new(doc.target_mi, pair)
    }
}

/// Computes all target and pairwise estimates on a `[0, 1]`-scaled training
/// set. Pairs are evaluated in parallel and written back by index.
pub fn build_mi_statistics(train: &CleanDataset, bins: usize) -> Result<MiStatistics, MiError> {
    check_bins(bins)?;
    let n = train.n_features();
    check_lengths(train.n_samples(), train.y().len())?;
    let columns: Vec<Vec<usize>> = (0..n)
        .map(|j| discretize(&train.column(j), bins))
        .collect::<Result<_, _>>()?;
    let y = label_codes(train.y())?;
    let target_mi: Vec<f64> = columns
        .par_iter()
        .map(|c| mi_of_codes(c, bins, &y, 2))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| mi_of_codes(&columns[i], bins, &columns[j], bins))
        .collect();
    let mut pair_mi = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        pair_mi[i][j] = v;
        pair_mi[j][i] = v;
    }
    MiStatistics::new(target_mi, pair_mi)
}

/// On-disk cache of MI statistics keyed by a hash of the training data and
/// the bin count.
#[derive(Debug, Clone)]
pub struct MiCache {
    dir: PathBuf,
}

impl MiCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn key(train: &CleanDataset, bins: usize) -> String {
        let mut h = Sha256::new();
        h.update(train.content_hash().as_bytes());
        h.update((bins as u64).to_le_bytes());
        crate::seed::hex(&h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("mi-{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<MiStatistics>, MiError> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        MiStatistics::from_json(&text).map(Some)
    }

    pub fn store(&self, key: &str, stats: &MiStatistics) -> Result<(), MiError> {
        fs::create_dir_all(&self.dir)?;
        crate::io::write_atomic(&self.path(key), stats.to_json().as_bytes())?;
        Ok(())
    }

    pub fn get_or_compute(
        &self,
        train: &CleanDataset,
        bins: usize,
    ) -> Result<MiStatistics, MiError> {
        let key = Self::key(train, bins);
        if let Some(stats) = self.load(&key)? {
            return Ok(stats);
        }
        let stats = build_mi_statistics(train, bins)?;
        self.store(&key, &stats)?;
        Ok(stats)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
