//! QUBO minimizers sharing one result contract.

mod anneal;
mod exhaustive;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{QuboError, QuboProblem, SubsetVector};

pub use anneal::{
    default_schedule, solve_simulated_annealing, AnnealSchedule, SimulatedAnnealingSolver,
    DEFAULT_SWEEPS,
};
pub use exhaustive::{solve_exhaustive, ExhaustiveSolver};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error("invalid anneal schedule: {0}")]
    InvalidSchedule(String),
    #[error("num_reads must be >= 1")]
    NoReads,
    #[error("remote solver: {0}")]
    Remote(String),
    #[error("malformed solver result: {0}")]
    Decode(String),
}

/// Anything that can minimize a QUBO.
pub trait Solver: Send + Sync {
    /// Short label used in reports, e.g. `simulated_annealing`.
    fn name(&self) -> &str;

    fn solve(&self, problem: &QuboProblem) -> Result<SolverResult, SolverError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bits: SubsetVector,
    pub energy: f64,
    pub count: usize,
}

/// Best assignment, every distinct sample, and the time spent in the solve
/// loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub solver_name: String,
    pub num_reads: usize,
    pub sampling_time_ms: f64,
    pub best: SubsetVector,
    pub best_energy: f64,
    pub samples: Vec<Sample>,
}

impl SolverResult {
    /// Aggregates raw reads into distinct samples and picks the best. The
    /// best is the lowest energy; equal energies go to the smaller integer
    /// encoding. Samples are listed in that same order.
    pub fn from_reads(
        solver_name: &str,
        reads: Vec<(SubsetVector, f64)>,
        sampling_time_ms: f64,
    ) -> Self {
        let num_reads = reads.len();
        let mut agg: BTreeMap<SubsetVector, (f64, usize)> = BTreeMap::new();
        for (bits, energy) in reads {
            agg.entry(bits).or_insert((energy, 0)).1 += 1;
        }
        let mut samples: Vec<Sample> = agg
            .into_iter()
            .map(|(bits, (energy, count))| Sample {
                bits,
                energy,
                count,
            })
            .collect();
        samples.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then(a.bits.integer_cmp(&b.bits))
        });
        let first = samples.first().expect("at least one read");
        Self {
            solver_name: solver_name.to_string(),
            num_reads,
            sampling_time_ms,
            best: first.bits.clone(),
            best_energy: first.energy,
            samples,
        }
    }

    /// Checks the structural invariants and that `best_energy` matches a
    /// local recomputation within `tolerance`.
    pub fn verify(&self, problem: &QuboProblem, tolerance: f64) -> Result<(), String> {
        if self.best.len() != problem.n() {
            return Err(format!(
                "best vector has {} bits, problem has {}",
                self.best.len(),
                problem.n()
            ));
        }
        let recomputed = problem.energy_unchecked(&self.best);
        if !((recomputed - self.best_energy).abs() <= tolerance) {
            return Err(format!(
                "reported best energy {} but recomputed {}",
                self.best_energy, recomputed
            ));
        }
        if self.samples.iter().map(|s| s.count).sum::<usize>() != self.num_reads {
            return Err("sample counts do not sum to num_reads".into());
        }
        if self.samples.iter().any(|s| s.bits.len() != problem.n()) {
            return Err("sample vector length mismatch".into());
        }
        if self.samples.iter().any(|s| s.energy < self.best_energy) {
            return Err("a sample has lower energy than the reported best".into());
        }
        if !(self.sampling_time_ms >= 0.0) {
            return Err("negative sampling time".into());
        }
        Ok(())
    }

    pub fn to_wire(&self) -> SolverResultWire {
        SolverResultWire {
            solver: self.solver_name.clone(),
            num_reads: self.num_reads,
            sampling_time_ms: self.sampling_time_ms,
            best_bits: self.best.to_u8(),
            best_energy: self.best_energy,
            samples: self
                .samples
                .iter()
                .map(|s| SampleWire {
                    bits: s.bits.to_u8(),
                    energy: s.energy,
                    count: s.count,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("result serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_wire()).expect("result serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        let wire: SolverResultWire =
            serde_json::from_str(text).map_err(|e| SolverError::Decode(e.to_string()))?;
        Self::try_from(wire)
    }
}

/// `{solver, num_reads, sampling_time_ms, best_bits, best_energy,
/// samples: [{bits, energy, count}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResultWire {
    pub solver: String,
    pub num_reads: usize,
    pub sampling_time_ms: f64,
    pub best_bits: Vec<u8>,
    pub best_energy: f64,
    pub samples: Vec<SampleWire>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWire {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub count: usize,
}

impl TryFrom<SolverResultWire> for SolverResult {
    type Error = SolverError;

    fn try_from(w: SolverResultWire) -> Result<Self, SolverError> {
        let best = SubsetVector::from_u8(&w.best_bits)?;
        let samples = w
            .samples
            .into_iter()
            .map(|s| {
                if s.bits.len() != best.len() {
                    return Err(SolverError::Decode(
                        "sample length differs from best".into(),
                    ));
                }
                Ok(Sample {
                    bits: SubsetVector::from_u8(&s.bits)?,
                    energy: s.energy,
                    count: s.count,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !w.best_energy.is_finite() || !w.sampling_time_ms.is_finite() {
            return Err(SolverError::Decode("non-finite number".into()));
        }
        Ok(Self {
            solver_name: w.solver,
            num_reads: w.num_reads,
            sampling_time_ms: w.sampling_time_ms,
            best,
            best_energy: w.best_energy,
            samples,
        })
    }
}

impl Serialize for SolverResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SolverResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = SolverResultWire::deserialize(d)?;
        SolverResult::try_from(wire).map_err(serde::de::Error::custom)
    }
}
