//! Feature subset selection for software defect prediction, posed as a
//! QUBO over mutual-information statistics.
//!
//! The pipeline cleans and balances a tabular dataset, estimates relevance
//! (feature/target) and redundancy (feature/feature) mutual information on
//! the training split, builds the objective
//! `-α Σ MI(f_i; y) x_i + β Σ_{i<j} MI(f_i; f_j) x_i x_j`, minimizes it with
//! a [`solvers::Solver`], and scores the selected subset with a linear SVM.

pub mod config;
pub mod dataset;
pub mod evaluation;
pub mod io;
pub mod mi;
pub mod pipeline;
pub mod qubo;
pub mod remote;
pub mod seed;
pub mod solvers;
pub mod svm;
pub mod synthetic;

pub use dataset::{CleanDataset, DataError, LabelColumn, LoadOptions, RawTable, SplitPair};
pub use mi::{MiError, MiStatistics};
pub use qubo::{
    brute_force_minimum, build_mi_qubo, MiQuboWeights, QuboError, QuboProblem, SubsetVector,
};
pub use solvers::{Solver, SolverError, SolverResult};
