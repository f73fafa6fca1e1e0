//! Makespan-optimal multi-agent path finding with continuous time.
//!
//! Agents are discs with their own speed and size moving along straight edges
//! of a graph embedded in the plane. Two solvers are provided: [`cbsr`], a
//! conflict-based search over constraint trees, and [`smt_cbsr`], which lazily
//! refines a propositional model and hands it to the embedded SAT engine.

pub mod geometry;
pub mod model;
pub mod validation;
pub mod bench;
pub mod lowlevel;
pub mod cbsr;
mod status;

pub use status::{SolveStatus, DEFAULT_TIMEOUT};
pub mod smt_cbsr;
