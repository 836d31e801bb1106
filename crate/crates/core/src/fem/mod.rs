//! P1 assembly and sparse symmetric solves.

mod assemble;
mod eval;
mod solve;
mod sparse;

pub use assemble::{assemble, local_mass, local_stiffness, Form, RegionCoeffs, View};
pub use eval::{eval_field, locate};
pub use solve::{solve_multi, solve_spd, Factorization, SolverKind, DEFAULT_TOL};
pub use sparse::SparseSymMatrix;

/// Coefficient vector of a P1 function on a two-sided DOF map.
pub type FieldVector = Vec<f64>;
