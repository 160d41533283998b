use std::time::Instant;

use super::{Solver, SolverError, SolverResult};
use crate::qubo::{brute_force_minimum, QuboProblem};

/// Enumerates every assignment; exact but limited to small `n`.
pub fn solve_exhaustive(problem: &QuboProblem) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let (best, energy) = brute_force_minimum(problem)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(SolverResult::from_reads(
        ExhaustiveSolver::NAME,
        vec![(best, energy)],
        elapsed,
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveSolver;

impl ExhaustiveSolver {
    pub const NAME: &'static str = "exhaustive";
}

impl Solver for ExhaustiveSolver {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn solve(&self, problem: &QuboProblem) -> Result<SolverResult, SolverError> {
        solve_exhaustive(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::SubsetVector;

    #[test]
    fn tie_example() {
        let p = QuboProblem::new(2, [(0, -1.0), (1, -1.0)], [((0, 1), 3.0)]).unwrap();
        let r = solve_exhaustive(&p).unwrap();
        assert_eq!(r.best, SubsetVector::from_bits(vec![true, false]));
        assert_eq!(r.best_energy, -1.0);
        assert_eq!(r.num_reads, 1);
        assert_eq!(r.samples.len(), 1);
        assert_eq!(r.best_energy, p.energy(&r.best).unwrap());
        assert!(r.sampling_time_ms >= 0.0);
    }

    #[test]
    fn empty_problem() {
        let r = solve_exhaustive(&QuboProblem::empty(0)).unwrap();
        assert!(r.best.is_empty());
        assert_eq!(r.best_energy, 0.0);
    }

    #[test]
    fn too_large() {
        assert!(solve_exhaustive(&QuboProblem::empty(30)).is_err());
    }
}
