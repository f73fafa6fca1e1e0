//! A small incremental CDCL SAT solver.
//!
//! The solver is clause-monotone: callers allocate variables, add clauses and
//! call [`Solver::solve`] as often as they like, but nothing is ever retracted.
//! That is exactly what lazy refinement loops need, where every round only
//! forbids more combinations.

mod dimacs;
mod heap;
mod lit;
mod solver;

pub use dimacs::{parse_dimacs, Cnf};
pub use lit::{Lit, Var};
pub use solver::{Model, SolveResult, Solver, SolverStats};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SatError {
    #[error("literal refers to unallocated variable {0}")]
    UnknownVariable(u32),
    #[error("malformed DIMACS input at line {line}: {message}")]
    Dimacs { line: usize, message: String },
}
