//! Linear-kernel SVM trained by deterministic primal subgradient descent.
//!
//! The objective is the per-sample normalized soft-margin loss
//!
//! ```text
//! λ/2 ‖(w, b)‖² + 1/m Σ max(0, 1 − y_i (w·x_i + b)),   λ = 1 / (c·m)
//! ```
//!
//! with labels mapped `{0, 1} → {−1, +1}`. Identical training rows are
//! merged and weighted by multiplicity, so duplicating the data set while
//! halving `c` reproduces the same model bit for bit. Every epoch visits
//! the unique rows in a seeded random order, taking a Pegasos step of size
//! `1/(λt)` per row followed by projection onto the ball of radius `1/√λ`.
//! Iterates from the second half of training are averaged; after each such
//! epoch the averaged iterate replaces the held model only if it does not
//! increase the mean training hinge loss, and the model held at the end is
//! returned.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPOCHS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("no training samples")]
    Empty,
    #[error("non-finite feature value at row {0}")]
    NonFinite(usize),
    #[error("row {row} has {got} features, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("invalid hyperparameter: {0}")]
    BadParam(&'static str),
    #[error("malformed model document: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            epochs: DEFAULT_EPOCHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_rows(x: &[Vec<f64>], width: usize) -> Result<(), SvmError> {
    for (row, r) in x.iter().enumerate() {
        if r.len() != width {
            return Err(SvmError::DimensionMismatch {
                row,
                expected: width,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(row));
        }
    }
    Ok(())
}

/// Training set with identical `(row, label)` pairs merged into one entry
/// carrying its multiplicity, in first-appearance order.
struct Trainer<'a> {
    rows: Vec<&'a [f64]>,
    signs: Vec<f64>,
    /// Multiplicity of each unique row divided by the total sample count.
    share: Vec<f64>,
    lambda: f64,
    dim: usize,
}

impl Trainer<'_> {
    /// Decision value for the augmented weight vector `(w, b)`.
    fn decision(&self, wb: &[f64], row: &[f64]) -> f64 {
        dot(&wb[..self.dim], row) + wb[self.dim]
    }

    fn mean_hinge(&self, wb: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.signs)
            .zip(&self.share)
            .map(|((r, &s), &p)| p * (1.0 - s * self.decision(wb, r)).max(0.0))
            .sum()
    }

    fn objective(&self, wb: &[f64]) -> f64 {
        0.5 * self.lambda * dot(wb, wb) + self.mean_hinge(wb)
    }

    /// One stochastic step on unique row `u` at global step `t`. The hinge
    /// subgradient is scaled by `U · share[u]` so that uniform sampling over
    /// unique rows is unbiased for the full objective.
    fn step(&self, wb: &mut [f64], u: usize, t: usize) {
        let eta = 1.0 / (self.lambda * t as f64);
        let shrink = 1.0 - eta * self.lambda;
        let (row, s) = (self.rows[u], self.signs[u]);
        let violated = s * self.decision(wb, row) < 1.0;
        wb.iter_mut().for_each(|w| *w *= shrink);
        if violated {
            let g = eta * s * self.share[u] * self.rows.len() as f64;
            for (w, v) in wb.iter_mut().zip(row) {
                *w += g * v;
            }
            wb[self.dim] += g;
        }
        let norm = dot(wb, wb).sqrt();
        let radius = 1.0 / self.lambda.sqrt();
        if norm > radius {
            let scale = radius / norm;
            wb.iter_mut().for_each(|w| *w *= scale);
        }
    }

    /// Runs all epochs, visiting unique rows in a fresh seeded order each
    /// epoch, and calls `observe` with the held model after each epoch of
    /// the averaging phase.
    fn run(&self, epochs: usize, seed: u64, mut observe: impl FnMut(&[f64])) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        let mut wb = vec![0.0; self.dim + 1];
        let mut avg = vec![0.0; self.dim + 1];
        let mut held: Option<(Vec<f64>, f64)> = None;
        let first_averaged = epochs / 2 + 1;
        let mut averaged = 0usize;
        let mut t = 0usize;
        for epoch in 1..=epochs {
            order.shuffle(&mut rng);
            for &u in &order {
                t += 1;
                self.step(&mut wb, u, t);
                if epoch >= first_averaged {
                    averaged += 1;
                    let k = averaged as f64;
                    for (a, w) in avg.iter_mut().zip(&wb) {
                        *a += (w - *a) / k;
                    }
                }
            }
            if epoch < first_averaged {
                continue;
            }
            let loss = self.mean_hinge(&avg);
            if held.as_ref().is_none_or(|(_, best)| loss <= *best) {
                held = Some((avg.clone(), loss));
            }
            observe(&held.as_ref().expect("set above").0);
        }
        held.expect("epochs >= 1").0
    }
}

fn trainer<'a>(
    x: &'a [Vec<f64>],
    y: &[u8],
    c: f64,
    epochs: usize,
) -> Result<Trainer<'a>, SvmError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(SvmError::BadParam("c must be positive"));
    }
    if epochs == 0 {
        return Err(SvmError::BadParam("epochs must be >= 1"));
    }
    if x.is_empty() {
        return Err(SvmError::Empty);
    }
    if x.len() != y.len() {
        return Err(SvmError::LabelCount(y.len(), x.len()));
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(SvmError::BadLabel(bad));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(SvmError::SingleClass);
    }
    let dim = x[0].len();
    check_rows(x, dim)?;

    let mut index: HashMap<(Vec<u64>, u8), usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut signs = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (r, &label) in x.iter().zip(y) {
        let key = (r.iter().map(|v| v.to_bits()).collect(), label);
        let u = *index.entry(key).or_insert_with(|| {
            rows.push(r.as_slice());
            signs.push(if label == 1 { 1.0 } else { -1.0 });
            counts.push(0);
            rows.len() - 1
        });
        counts[u] += 1;
    }
    let m = x.len() as f64;
    Ok(Trainer {
        rows,
        signs,
        share: counts.iter().map(|&k| k as f64 / m).collect(),
        lambda: 1.0 / (c * m),
        dim,
    })
}

/// Trains on `x` (rows of selected, normalized features) and `{0, 1}` labels.
/// Deterministic given `seed`, which drives the per-epoch visiting order.
pub fn fit(
    x: &[Vec<f64>],
    y: &[u8],
    params: SvmParams,
    seed: u64,
) -> Result<LinearSvmModel, SvmError> {
    let t = trainer(x, y, params.c, params.epochs)?;
    let wb = t.run(params.epochs, seed, |_| {});
    Ok(LinearSvmModel {
        weights: wb[..t.dim].to_vec(),
        bias: wb[t.dim],
        c: params.c,
        epochs: params.epochs,
        seed,
        feature_names: Vec::new(),
    })
}

/// Per-epoch `(mean hinge loss, regularized objective)` of the held model
/// over the averaging phase.
pub fn training_trace(
    x: &[Vec<f64>],
    y: &[u8],
    params: SvmParams,
    seed: u64,
) -> Result<Vec<(f64, f64)>, SvmError> {
    let t = trainer(x, y, params.c, params.epochs)?;
    let mut trace = Vec::new();
    t.run(params.epochs, seed, |m| {
        trace.push((t.mean_hinge(m), t.objective(m)))
    });
    Ok(trace)
}

impl LinearSvmModel {
    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn decision_function(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    /// Label 1 iff the decision value is strictly positive.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u8>, SvmError> {
        check_rows(x, self.weights.len())?;
        Ok(x.iter()
            .map(|r| u8::from(self.decision_function(r) > 0.0))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        let m: Self = serde_json::from_str(text).map_err(|e| SvmError::Decode(e.to_string()))?;
        if m.weights.iter().any(|w| !w.is_finite()) || !m.bias.is_finite() {
            return Err(SvmError::Decode("non-finite weights".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Class by sign of f1 − 0.5, with a gap of 0.1 around the boundary.
    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let f1 = if label == 1 {
                rng.random_range(0.6..=1.0)
            } else {
                rng.random_range(0.0..=0.4)
            };
            x.push(vec![f1, rng.random_range(0.0..=1.0)]);
            y.push(label);
        }
        (x, y)
    }

    fn accuracy(m: &LinearSvmModel, x: &[Vec<f64>], y: &[u8]) -> f64 {
        let p = m.predict(x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_data_is_fit_perfectly() {
        let (x, y) = separable(200, 1);
        let m = fit(&x, &y, SvmParams { c: 1.0, epochs: 50 }, 0).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn duplicated_samples_same_decision_function() {
        // Doubling m halves λ = 1/(c·m); halving c restores it, isolating the
        // per-sample normalization of the loss.
        let (x, y) = separable(120, 2);
        let m1 = fit(
            &x,
            &y,
            SvmParams {
                c: 1.0,
                epochs: 100,
            },
            0,
        )
        .unwrap();
        let x2: Vec<Vec<f64>> = x.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        let y2: Vec<u8> = y.iter().flat_map(|&v| [v, v]).collect();
        let m2 = fit(
            &x2,
            &y2,
            SvmParams {
                c: 0.5,
                epochs: 100,
            },
            0,
        )
        .unwrap();
        for (a, b) in m1.weights.iter().zip(&m2.weights) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((m1.bias - m2.bias).abs() < 1e-6);
        assert_eq!(m1.weights, m2.weights);
    }

    #[test]
    fn deterministic() {
        let (x, y) = separable(80, 3);
        let p = SvmParams::default();
        assert_eq!(fit(&x, &y, p, 7).unwrap(), fit(&x, &y, p, 7).unwrap());
        assert_ne!(
            fit(&x, &y, p, 7).unwrap().weights,
            fit(&x, &y, p, 8).unwrap().weights
        );
    }

    #[test]
    fn converges_near_optimum_on_overlapping_classes() {
        // Two overlapping Gaussian classes; compare against a long run.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(0.0, 0.15).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let label = (i % 2) as u8;
            let shift = if label == 1 { 0.55 } else { 0.45 };
            x.push(
                (0..5)
                    .map(|_| shift + rng.sample(normal))
                    .collect::<Vec<f64>>(),
            );
            y.push(label);
        }
        let obj = |epochs| {
            let p = SvmParams { c: 1.0, epochs };
            training_trace(&x, &y, p, 0).unwrap().last().unwrap().1
        };
        let (short, long) = (obj(200), obj(5000));
        assert!(short - long < 0.01 * long, "{short} vs {long}");
    }

    #[test]
    fn threshold_and_tie_rule() {
        let m = LinearSvmModel {
            weights: vec![1.0],
            bias: -0.5,
            c: 1.0,
            epochs: 1,
            seed: 0,
            feature_names: vec![],
        };
        assert_eq!(
            m.predict(&[vec![0.7], vec![0.3], vec![0.5]]).unwrap(),
            vec![1, 0, 0]
        );
        assert!(matches!(
            m.predict(&[vec![0.1, 0.2]]),
            Err(SvmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_column_with_zero_weight_is_inert() {
        let (x, y) = separable(60, 4);
        let m = fit(&x, &y, SvmParams::default(), 0).unwrap();
        let mut wide = m.clone();
        wide.weights.push(0.0);
        let xw: Vec<Vec<f64>> = x.iter().map(|r| [r.as_slice(), &[0.0]].concat()).collect();
        assert_eq!(m.predict(&x).unwrap(), wide.predict(&xw).unwrap());
    }

    #[test]
    fn hinge_loss_non_increasing_on_separable_data() {
        for seed in 0..20 {
            let (x, y) = separable(150, seed);
            let trace = training_trace(&x, &y, SvmParams::default(), seed).unwrap();
            for w in trace.windows(2) {
                assert!(
                    w[1].0 <= w[0].0,
                    "seed {seed}: hinge {:?} -> {:?}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn serialization_round_trip_predicts_identically() {
        let (x, y) = separable(50, 5);
        let m = fit(&x, &y, SvmParams::default(), 3)
            .unwrap()
            .with_feature_names(vec!["a".into(), "b".into()]);
        let back = LinearSvmModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn input_errors() {
        let p = SvmParams::default();
        assert_eq!(
            fit(&[vec![0.1], vec![0.2]], &[1, 1], p, 0),
            Err(SvmError::SingleClass)
        );
        assert_eq!(fit(&[], &[], p, 0), Err(SvmError::Empty));
        assert_eq!(
            fit(&[vec![f64::NAN], vec![0.2]], &[0, 1], p, 0),
            Err(SvmError::NonFinite(0))
        );
        assert!(fit(
            &[vec![0.1], vec![0.2]],
            &[0, 1],
            SvmParams { c: 0.0, epochs: 5 },
            0
        )
        .is_err());
    }
}
