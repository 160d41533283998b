//! Sparse QUBO problems over binary variables and the mutual-information
//! feature-selection objective built on top of them.
//!
//! A problem stores its diagonal (linear) coefficients `q_ii` and the strictly
//! upper-triangular couplings `q_ij` (`i < j`). Absent keys are zero. The
//! objective minimized is
//!
//! ```text
//! f(x) = Σ_i q_ii x_i + Σ_{i<j} q_ij x_i x_j
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mi::MiStatistics;

/// Largest `n` accepted by [`brute_force_minimum`].
pub const MAX_BRUTE_FORCE_VARS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("quadratic key ({i}, {j}) must satisfy i < j")]
    NotUpperTriangular { i: usize, j: usize },
    #[error("coefficient for {key} is not finite")]
    NonFinite { key: String },
    #[error("duplicate coefficient entry for {key}")]
    DuplicateKey { key: String },
    #[error("vector has {got} bits, problem has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid weights alpha={alpha}, beta={beta}: {reason}")]
    InvalidWeights {
        alpha: f64,
        beta: f64,
        reason: &'static str,
    },
    #[error("brute force limited to {max} variables, problem has {n}")]
    TooLarge { n: usize, max: usize },
    #[error("malformed QUBO document: {0}")]
    Decode(String),
}

/// An assignment of the binary decision variables; bit `i` set means feature
/// `i` is selected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetVector {
    bits: Vec<bool>,
}

impl SubsetVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Builds the vector whose bit `i` is bit `i` of `value`.
    pub fn from_index(value: u64, n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| (value >> i) & 1 == 1).collect(),
        }
    }

    pub fn from_indices(n: usize, selected: &[usize]) -> Self {
        let mut v = Self::zeros(n);
        for &i in selected {
            v.bits[i] = true;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn count_selected(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Bits as 0/1 integers, the wire representation.
    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| u8::from(b)).collect()
    }

    pub fn from_u8(bits: &[u8]) -> Result<Self, QuboError> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(QuboError::Decode(format!(
                    "bit value {other} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bits)
    }

    /// Tie-break order among equal-energy vectors: compares the vectors as
    /// integers with bit 0 least significant, so fewer high-index selections
    /// win and the all-zero vector is smallest.
    pub fn integer_cmp(&self, other: &Self) -> std::cmp::Ordering {
        debug_assert_eq!(self.len(), other.len());
        for i in (0..self.len()).rev() {
            match self.bits[i].cmp(&other.bits[i]) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }
}

/// Validated weights for the MI objective: `alpha` scales relevance to the
/// target, `beta` scales pairwise redundancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct MiQuboWeights {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawWeights> for MiQuboWeights {
    type Error = QuboError;

    fn try_from(raw: RawWeights) -> Result<Self, Self::Error> {
        Self::new(raw.alpha, raw.beta)
    }
}

impl MiQuboWeights {
    pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(alpha: f64, beta: f64) -> Result<Self, QuboError> {
        let err = |reason| {
            Err(QuboError::InvalidWeights {
                alpha,
                beta,
                reason,
            })
        };
        if !alpha.is_finite() || !beta.is_finite() {
            return err("weights must be finite");
        }
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return err("each weight must lie in [0, 1]");
        }
        if (alpha + beta - 1.0).abs() > Self::WEIGHT_SUM_TOLERANCE {
            return err("alpha + beta must equal 1");
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for MiQuboWeights {
    fn default() -> Self {
        Self {
            alpha: 0.98,
            beta: 0.02,
        }
    }
}

/// Immutable sparse QUBO. Construction validates every key and coefficient
/// and builds a per-variable neighbor list used for O(degree) flip deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    n: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    diag: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl QuboProblem {
    /// Exact-zero coefficients are dropped.
    pub fn new(
        n: usize,
        linear: impl IntoIterator<Item = (usize, f64)>,
        quadratic: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self, QuboError> {
        let mut lin = BTreeMap::new();
        for (i, v) in linear {
            if i >= n {
                return Err(QuboError::IndexOutOfRange { index: i, n });
            }
            if !v.is_finite() {
                return Err(QuboError::NonFinite {
                    key: format!("linear[{i}]"),
                });
            }
            if lin.insert(i, v).is_some() {
                return Err(QuboError::DuplicateKey {
                    key: format!("linear[{i}]"),
                });
            }
        }
        let mut quad = BTreeMap::new();
        for ((i, j), v) in quadratic {
            if i >= n || j >= n {
                return Err(QuboError::IndexOutOfRange { index: i.max(j), n });
            }
            if i >= j {
                return Err(QuboError::NotUpperTriangular { i, j });
            }
            if !v.is_finite() {
                return Err(QuboError::NonFinite {
                    key: format!("quadratic[{i},{j}]"),
                });
            }
            if quad.insert((i, j), v).is_some() {
                return Err(QuboError::DuplicateKey {
                    key: format!("quadratic[{i},{j}]"),
                });
            }
        }
        lin.retain(|_, v| *v != 0.0);
        quad.retain(|_, v| *v != 0.0);
        Ok(Self::from_maps(n, lin, quad))
    }

    fn from_maps(
        n: usize,
        linear: BTreeMap<usize, f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
    ) -> Self {
        let mut diag = vec![0.0; n];
        for (&i, &v) in &linear {
            diag[i] = v;
        }
        let mut neighbors = vec![Vec::new(); n];
        for (&(i, j), &v) in &quadratic {
            neighbors[i].push((j, v));
            neighbors[j].push((i, v));
        }
        Self {
            n,
            linear,
            quadratic,
            diag,
            neighbors,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_maps(n, BTreeMap::new(), BTreeMap::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn linear_coef(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn quadratic_coef(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn nnz(&self) -> usize {
        self.linear.len() + self.quadratic.len()
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.linear.values().chain(self.quadratic.values()).copied()
    }

    /// Coefficient-wise `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self, QuboError> {
        if self.n != other.n {
            return Err(QuboError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut lin: BTreeMap<usize, f64> = BTreeMap::new();
        for (&i, &v) in &self.linear {
            *lin.entry(i).or_default() += a * v;
        }
        for (&i, &v) in &other.linear {
            *lin.entry(i).or_default() += b * v;
        }
        let mut quad: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&k, &v) in &self.quadratic {
            *quad.entry(k).or_default() += a * v;
        }
        for (&k, &v) in &other.quadratic {
            *quad.entry(k).or_default() += b * v;
        }
        Self::new(self.n, lin, quad)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, QuboError> {
        Self::new(
            self.n,
            self.linear.iter().map(|(&i, &v)| (i, v * factor)),
            self.quadratic.iter().map(|(&k, &v)| (k, v * factor)),
        )
    }

    fn check_dim(&self, x: &SubsetVector) -> Result<(), QuboError> {
        if x.len() != self.n {
            return Err(QuboError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `Σ q_ii x_i + Σ_{i<j} q_ij x_i x_j`. The contributing coefficients
    /// are summed in ascending order, so assignments that pick up the same
    /// multiset of coefficients have bit-identical energies.
    pub fn energy(&self, x: &SubsetVector) -> Result<f64, QuboError> {
        self.check_dim(x)?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &SubsetVector) -> f64 {
        self.energy_bits(x.bits())
    }

    pub(crate) fn energy_bits(&self, bits: &[bool]) -> f64 {
        let mut terms: Vec<f64> = self
            .linear
            .iter()
            .filter(|(&i, _)| bits[i])
            .map(|(_, &v)| v)
            .collect();
        terms.extend(
            self.quadratic
                .iter()
                .filter(|(&(i, j), _)| bits[i] && bits[j])
                .map(|(_, &v)| v),
        );
        terms.sort_unstable_by(f64::total_cmp);
        terms.iter().sum()
    }

    /// Largest possible single-flip energy change, `max_i |q_ii| + Σ_j |q_ij|`.
    pub fn max_flip_magnitude(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.diag[i].abs() + self.neighbors[i].iter().map(|(_, v)| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Energy change from flipping bit `i` of `x`, in O(degree of i).
    pub fn flip_delta(&self, x: &SubsetVector, i: usize) -> Result<f64, QuboError> {
        self.check_dim(x)?;
        if i >= self.n {
            return Err(QuboError::IndexOutOfRange {
                index: i,
                n: self.n,
            });
        }
        Ok(self.flip_delta_unchecked(x.bits(), i))
    }

    #[inline]
    pub(crate) fn flip_delta_unchecked(&self, bits: &[bool], i: usize) -> f64 {
        let mut field = self.diag[i];
        for &(j, v) in &self.neighbors[i] {
            if bits[j] {
                field += v;
            }
        }
        if bits[i] {
            -field
        } else {
            field
        }
    }

    pub fn to_wire(&self) -> QuboWire {
        QuboWire {
            n: self.n,
            linear: self.linear.iter().map(|(&i, &v)| (i, v)).collect(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&(i, j), &v)| (i, j, v))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("QUBO serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, QuboError> {
        let wire: QuboWire =
            serde_json::from_str(text).map_err(|e| QuboError::Decode(e.to_string()))?;
        Self::try_from(wire)
    }
}

/// JSON document form: `{n, linear: [[i, v]...], quadratic: [[i, j, v]...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboWire {
    pub n: usize,
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, usize, f64)>,
}

impl TryFrom<QuboWire> for QuboProblem {
    type Error = QuboError;

    fn try_from(wire: QuboWire) -> Result<Self, Self::Error> {
        QuboProblem::new(
            wire.n,
            wire.linear,
            wire.quadratic.into_iter().map(|(i, j, v)| ((i, j), v)),
        )
    }
}

impl Serialize for QuboProblem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuboProblem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = QuboWire::deserialize(d)?;
        QuboProblem::try_from(wire).map_err(serde::de::Error::custom)
    }
}

/// Builds `-alpha Σ MI(f_i; y) x_i + beta Σ_{i<j} MI(f_i; f_j) x_i x_j`.
pub fn build_mi_qubo(mi: &MiStatistics, weights: MiQuboWeights) -> QuboProblem {
    let n = mi.n();
    let linear = (0..n).map(|i| (i, -weights.alpha() * mi.target_mi()[i]));
    let quadratic =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| ((i, j), weights.beta() * mi.pair(i, j))));
    // MiStatistics guarantees finite entries and the loops emit unique,
    // in-range, upper-triangular keys.
    QuboProblem::new(n, linear.collect::<Vec<_>>(), quadratic.collect::<Vec<_>>())
        .expect("MI statistics produce a valid QUBO")
}

/// Exact minimizer by enumeration of all `2^n` assignments. Among equal
/// energies the vector with the smallest integer value (bit 0 least
/// significant) wins.
///
/// Assignments are visited in Gray-code order with incremental energies;
/// only those within a small tolerance of the best so far are re-scored
/// with the exact [`QuboProblem::energy`].
pub fn brute_force_minimum(problem: &QuboProblem) -> Result<(SubsetVector, f64), QuboError> {
    let n = problem.n();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(QuboError::TooLarge {
            n,
            max: MAX_BRUTE_FORCE_VARS,
        });
    }
    let tol = 1e-9 * problem.max_flip_magnitude().max(1.0);
    let mut bits = vec![false; n];
    let mut running = 0.0;
    let mut best_value = 0u64;
    let mut best_energy = 0.0;
    for k in 1..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        running += problem.flip_delta_unchecked(&bits, i);
        bits[i] = !bits[i];
        if running > best_energy + tol {
            continue;
        }
        let e = problem.energy_bits(&bits);
        let value = k ^ (k >> 1);
        if e < best_energy || (e == best_energy && value < best_value) {
            best_energy = e;
            best_value = value;
        }
    }
    Ok((SubsetVector::from_index(best_value, n), best_energy))
}
