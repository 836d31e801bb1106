//! Measure-free layer potentials on two-sided planar domains.
//!
//! Every boundary operator in this crate is defined through a quadratic
//! energy minimization on a two-sided P1 finite element space: the interface
//! carries duplicated degrees of freedom, traces are nodal values, and normal
//! derivatives are the residual functionals of the discrete weak form. No
//! surface measure enters any definition.
//!
//! The pipeline is
//! [`mesh`] (interfaces, triangulation, two-sided DOF maps) ->
//! [`fem`] (assembly, sparse SPD solves) ->
//! [`spaces`] (traces, jumps, trace Grams) ->
//! [`operators`] (Dirichlet/Neumann solves, single and double layers) ->
//! [`boundary`] (V, W, K, K*, Calderon projectors, spectra, Neumann series),
//! with [`analytic`] providing independent oracles and [`imaging`] the
//! inclusion experiments.

pub mod analytic;
pub mod boundary;
pub mod error;
pub mod fem;
pub mod imaging;
mod linalg;
pub mod mesh;
pub mod operators;
pub mod render;
pub mod report;
pub mod spaces;

pub use error::{Error, Result};
