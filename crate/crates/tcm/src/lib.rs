//! Test-suite minimization as a QUBO.
//!
//! A labeled suite becomes a feature-by-test coverage matrix, the matrix
//! becomes a sparse QUBO (per-test costs plus lambda-weighted coverage
//! penalties), and a solver (exhaustive, simulated annealing, or greedy
//! set cover) picks the minimized subset. Verification, benchmarking, and
//! an LLM-driven generate/minimize/refine pipeline sit on top.

pub mod bench;
pub mod ingest;
pub mod llm;
pub mod model;
pub mod qubo;
pub mod solvers;
pub mod verify;

pub use model::{build_coverage_matrix, uncoverable_features, CoverageMatrix, TestSuite};
pub use qubo::{auto_lambda, build_qubo, energy, flip_delta, Assignment, QuboConfig, QuboModel};
pub use solvers::{exact_solve, greedy_cover, simulated_annealing, AnnealParams, SolveResult};
