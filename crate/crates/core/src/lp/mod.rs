//! Linear programming backends.
//!
//! [`solve`] is a dense bounded-variable revised primal simplex that returns
//! primal and dual certificates. [`enumerate_vertices`] is an exhaustive basis
//! enumeration used as an independent oracle on small instances.
//! [`PolyhedralProgram`] solves `min c'z + sum_i w_i max_k (g_ik'z + h_ik)`
//! subject to range rows, which is the epigraph LP of the training and
//! scenario problems written without its per-sample auxiliary variables.

mod dump;
mod polyhedral;
mod problem;
mod simplex;
mod vertex;

pub use dump::write_lp_dump;
pub use polyhedral::{PolyhedralProgram, PolyhedralSolution, SolverOptions};
pub use problem::{LpProblem, LpSolution, LpStatus};
pub use simplex::solve;
pub use vertex::enumerate_vertices;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("numerical failure after {iterations} iterations: {reason}")]
    NumericalFailure { iterations: usize, reason: String },
    #[error("problem too large for vertex enumeration ({0})")]
    TooLarge(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
}

/// Pivot tolerance.
pub(crate) const PIVOT_TOL: f64 = 1e-10;
/// Primal/dual feasibility tolerance.
pub(crate) const FEAS_TOL: f64 = 1e-8;
