//! Restart-based simulated annealing with single-bit-flip Metropolis moves
//! and a geometric inverse-temperature schedule.

use std::time::Instant;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Solver, SolverError, SolverResult};
use crate::qubo::{QuboProblem, SubsetVector};
use crate::seed;

pub const DEFAULT_SWEEPS: usize = 1000;
const FALLBACK_BETA: (f64, f64) = (0.1, 10.0);

/// Inverse temperatures rise geometrically from `beta_start` on the first
/// sweep to `beta_end` on the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl AnnealSchedule {
    pub fn new(sweeps: usize, beta_start: f64, beta_end: f64) -> Result<Self, SolverError> {
        let s = Self {
            sweeps,
            beta_start,
            beta_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.sweeps == 0 {
            return Err(SolverError::InvalidSchedule("sweeps must be >= 1".into()));
        }
        if !(self.beta_start.is_finite() && self.beta_start > 0.0) {
            return Err(SolverError::InvalidSchedule(format!(
                "beta_start {} must be positive",
                self.beta_start
            )));
        }
        if !(self.beta_end.is_finite() && self.beta_end > self.beta_start) {
            return Err(SolverError::InvalidSchedule(format!(
                "beta_end {} must exceed beta_start {}",
                self.beta_end, self.beta_start
            )));
        }
        Ok(())
    }

    pub fn betas(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta_end];
        }
        let ratio = self.beta_end / self.beta_start;
        let last = (self.sweeps - 1) as f64;
        (0..self.sweeps)
            .map(|s| self.beta_start * ratio.powf(s as f64 / last))
            .collect()
    }

    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }
}

/// Betas from coefficient magnitudes: at the start the largest possible
/// single-flip change is accepted with probability 1/2, at the end the
/// smallest nonzero coefficient is accepted with probability 1/100.
pub fn default_schedule(problem: &QuboProblem) -> AnnealSchedule {
    if problem.is_zero() {
        warn!("all-zero QUBO; using fallback schedule beta {FALLBACK_BETA:?}");
        return AnnealSchedule {
            sweeps: DEFAULT_SWEEPS,
            beta_start: FALLBACK_BETA.0,
            beta_end: FALLBACK_BETA.1,
        };
    }
    let max_delta = (0..problem.n())
        .map(|i| {
            problem.linear_coef(i).abs()
                + problem
                    .neighbors(i)
                    .iter()
                    .map(|(_, v)| v.abs())
                    .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let min_delta = problem
        .coefficients()
        .map(f64::abs)
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    AnnealSchedule {
        sweeps: DEFAULT_SWEEPS,
        beta_start: std::f64::consts::LN_2 / max_delta,
        beta_end: 100f64.ln() / min_delta,
    }
}

/// One annealing run followed by [`polish`]. Returns the final vector and
/// its energy.
pub(crate) fn anneal_read(problem: &QuboProblem, betas: &[f64], seed: u64) -> (SubsetVector, f64) {
    let n = problem.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let mut energy = problem.energy_unchecked(&SubsetVector::from_bits(bits.clone()));
    for &beta in betas {
        for i in 0..n {
            let delta = problem.flip_delta_unchecked(&bits, i);
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                bits[i] = !bits[i];
                energy += delta;
            }
        }
    }
    let tol = 1e-9 * problem.max_flip_magnitude().max(1.0) * n.max(1) as f64;
    debug_assert!((energy - problem.energy_bits(&bits)).abs() <= tol);
    let bits = polish(problem, bits);
    let polished = problem.energy_bits(&bits);
    debug_assert!(polished <= energy + tol);
    (SubsetVector::from_bits(bits), polished)
}

/// Zero-temperature cleanup after annealing. Takes every improving flip,
/// then walks equal-energy plateaus towards the smaller integer encoding:
/// clears set bits whose removal costs nothing and swaps a set bit `j` for
/// an unset bit `i < j` when that does not raise the energy. Each accepted
/// move lowers the energy or the integer value, so the loop terminates.
pub(crate) fn polish(problem: &QuboProblem, mut bits: Vec<bool>) -> Vec<bool> {
    let n = problem.n();
    let tol = 1e-9 * problem.max_flip_magnitude().max(1.0);
    loop {
        let mut changed = false;
        for i in 0..n {
            let delta = problem.flip_delta_unchecked(&bits, i);
            if delta < 0.0 || (delta == 0.0 && bits[i]) {
                bits[i] = !bits[i];
                changed = true;
            }
        }
        if changed {
            continue;
        }
        // Local fields: flipping k changes the energy by field[k] if k is
        // unset and by -field[k] if set.
        let field: Vec<f64> = (0..n)
            .map(|k| {
                let d = problem.flip_delta_unchecked(&bits, k);
                if bits[k] {
                    -d
                } else {
                    d
                }
            })
            .collect();
        let current = problem.energy_bits(&bits);
        'search: for j in (0..n).rev() {
            if !bits[j] {
                continue;
            }
            for i in 0..j {
                if bits[i] {
                    continue;
                }
                let delta = field[i] - field[j] - problem.quadratic_coef(i, j);
                if delta > tol {
                    continue;
                }
                bits[i] = true;
                bits[j] = false;
                if problem.energy_bits(&bits) <= current {
                    changed = true;
                    break 'search;
                }
                bits[i] = false;
                bits[j] = true;
            }
        }
        if !changed {
            return bits;
        }
    }
}

/// Runs `num_reads` independent anneals. Read `r` draws from a stream seeded
/// by `(seed, r)`, so the result does not depend on thread count.
pub fn solve_simulated_annealing(
    problem: &QuboProblem,
    num_reads: usize,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<SolverResult, SolverError> {
    if num_reads == 0 {
        return Err(SolverError::NoReads);
    }
    schedule.validate()?;
    let betas = schedule.betas();
    let start = Instant::now();
    let reads: Vec<(SubsetVector, f64)> = (0..num_reads as u64)
        .into_par_iter()
        .map(|r| {
            let (x, tracked) = anneal_read(problem, &betas, seed::derive_index(seed, "read", r));
            let energy = problem.energy_unchecked(&x);
            debug_assert!((tracked - energy).abs() <= 1e-9 * (problem.n().max(1) as f64));
            (x, energy)
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(SolverResult::from_reads(
        SimulatedAnnealingSolver::NAME,
        reads,
        elapsed,
    ))
}

/// Simulated annealing with fixed read count and seed. Without explicit
/// betas the schedule is derived per problem by [`default_schedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedAnnealingSolver {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_range: Option<(f64, f64)>,
    pub seed: u64,
}

impl SimulatedAnnealingSolver {
    pub const NAME: &'static str = "simulated_annealing";

    pub fn new(num_reads: usize, seed: u64) -> Self {
        Self {
            num_reads,
            sweeps: DEFAULT_SWEEPS,
            beta_range: None,
            seed,
        }
    }

    pub fn schedule_for(&self, problem: &QuboProblem) -> Result<AnnealSchedule, SolverError> {
        match self.beta_range {
            Some((start, end)) => AnnealSchedule::new(self.sweeps, start, end),
            None => Ok(default_schedule(problem).with_sweeps(self.sweeps)),
        }
    }
}

impl Solver for SimulatedAnnealingSolver {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn solve(&self, problem: &QuboProblem) -> Result<SolverResult, SolverError> {
        let schedule = self.schedule_for(problem)?;
        solve_simulated_annealing(problem, self.num_reads, &schedule, self.seed)
    }
}
