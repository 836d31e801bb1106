//! Conductivity inclusions: the direct Neumann problem, the boundary
//! representation `u = H − Ṡ_∂D φ`, and the monotone identification identity.

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boundary::{build_operator, OperatorKind};
use crate::error::{Error, Result};
use crate::fem::{assemble, Factorization, FieldVector, Form, RegionCoeffs, SolverKind, SparseSymMatrix, View, DEFAULT_TOL};
use crate::mesh::{build_dof_map, dist, Region, Side, TriMesh, TwoSidedDofMap};
use crate::operators::SolveContext;
use crate::spaces::{trace, trace_gram, weak_normal_derivative, CotraceVector, GramSide, SideForms, TraceVector};

/// `∇·((1 + (k−1)𝟙_D)∇u) = 0` in Ω with Neumann data `g` on ∂Ω.
///
/// Ω is the inner side of the mesh interface; D is a union of inclusion
/// regions of the same mesh.
#[derive(Debug, Clone)]
pub struct InclusionProblem {
    mesh: TriMesh,
    dofs: TwoSidedDofMap,
    inclusion: BTreeSet<Region>,
    k: f64,
    g: CotraceVector,
}

impl InclusionProblem {
    pub fn new(mesh: TriMesh, inclusion: impl IntoIterator<Item = Region>, k: f64, g: CotraceVector) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("contrast must be positive, got {k}")));
        }
        let dofs = build_dof_map(&mesh)?;
        let inclusion: BTreeSet<Region> = inclusion.into_iter().collect();
        let present = mesh.regions();
        for &r in &inclusion {
            if !matches!(r, Region::Inclusion(_)) {
                return Err(Error::InvalidArgument(format!("{r:?} is not an inclusion region")));
            }
            if !present.contains(&r) {
                return Err(Error::UnknownRegion(r.code()));
            }
        }
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if inclusion.contains(&mesh.tags()[t]) && tri.iter().any(|&v| dofs.interface_slot(v).is_some()) {
                return Err(Error::Geometry("inclusion touches the outer boundary".into()));
            }
        }
        if g.len() != dofs.num_interface() {
            return Err(Error::Dimension { expected: dofs.num_interface(), got: g.len() });
        }
        g.check_compatible()?;
        Ok(InclusionProblem { mesh, dofs, inclusion, k, g })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn dofs(&self) -> &TwoSidedDofMap {
        &self.dofs
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn data(&self) -> &CotraceVector {
        &self.g
    }

    pub fn inclusion(&self) -> &BTreeSet<Region> {
        &self.inclusion
    }

    /// Same geometry and data with a different inclusion.
    pub fn with_inclusion(&self, inclusion: impl IntoIterator<Item = Region>) -> Result<Self> {
        InclusionProblem::new(self.mesh.clone(), inclusion, self.k, self.g.clone())
    }

    /// Weighted stiffness on Ω in two-sided numbering.
    fn weighted_stiffness(&self, inclusion: &BTreeSet<Region>) -> Result<SparseSymMatrix> {
        let coeffs = self
            .mesh
            .regions()
            .into_iter()
            .filter(|r| r.is_interior())
            .fold(RegionCoeffs::new(), |c, r| c.with(r, if inclusion.contains(&r) { self.k } else { 1.0 }));
        assemble(&self.mesh, &self.dofs, Form::Stiffness, &coeffs, View::TwoSided)
    }
}

/// Low-order multipole Neumann data: `cos(nθ)` weighted by the dual cell
/// length at each boundary node, shifted to sum to zero.
pub fn multipole_data(mesh: &TriMesh, dofs: &TwoSidedDofMap, order: u32) -> CotraceVector {
    let nodes: Vec<_> = dofs.interface_nodes().iter().map(|&v| mesh.vertices()[v]).collect();
    let n = nodes.len();
    let mut g: Vec<f64> = (0..n)
        .map(|j| {
            let w = 0.5 * (dist(nodes[j], nodes[(j + 1) % n]) + dist(nodes[j], nodes[(j + n - 1) % n]));
            w * (order as f64 * nodes[j][1].atan2(nodes[j][0])).cos()
        })
        .collect();
    let mean = g.iter().sum::<f64>() / n as f64;
    g.iter_mut().for_each(|x| *x -= mean);
    CotraceVector(g)
}

fn inner_dofs(dofs: &TwoSidedDofMap) -> (Vec<usize>, Vec<usize>) {
    let gamma = dofs.interface_dofs(Side::Inner);
    let mut all = dofs.interior_dofs(Side::Inner);
    all.extend_from_slice(&gamma);
    (all, gamma)
}

fn solve_weighted(p: &InclusionProblem, inclusion: &BTreeSet<Region>) -> Result<(FieldVector, SparseSymMatrix)> {
    let a = p.weighted_stiffness(inclusion)?;
    let (all, gamma) = inner_dofs(&p.dofs);
    let mut u = vec![0.0; p.dofs.num_dofs()];
    if p.g.iter().all(|&x| x == 0.0) {
        return Ok((u, a));
    }
    // the constant is fixed by pinning one boundary value, then removed
    let pinned = gamma[0];
    let idx: Vec<usize> = all.iter().copied().filter(|&d| d != pinned).collect();
    let fact = Factorization::new(a.principal(&idx), SolverKind::Direct, DEFAULT_TOL)?;
    let mut rhs_full = vec![0.0; p.dofs.num_dofs()];
    for (j, &d) in gamma.iter().enumerate() {
        rhs_full[d] = p.g[j];
    }
    let rhs: Vec<f64> = idx.iter().map(|&d| rhs_full[d]).collect();
    let x = fact.solve(&rhs)?;
    for (i, &d) in idx.iter().enumerate() {
        u[d] = x[i];
    }
    let mean = gamma.iter().map(|&d| u[d]).sum::<f64>() / gamma.len() as f64;
    for &d in &all {
        u[d] -= mean;
    }
    let au = a.mul_vec(&u);
    let res = all.iter().map(|&d| (au[d] - rhs_full[d]).powi(2)).sum::<f64>().sqrt();
    let scale = p.g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if res > 1e-10 * scale {
        return Err(Error::NoConvergence { iterations: 1, residual: res / scale, tolerance: 1e-10 });
    }
    Ok((u, a))
}

/// Solution of the inclusion problem on Ω in the interface DOF numbering,
/// normalized to a mean-zero boundary trace; the outer side is zero.
pub fn solve_inclusion_direct(p: &InclusionProblem) -> Result<FieldVector> {
    Ok(solve_weighted(p, &p.inclusion)?.0)
}

/// `∫_Ω (1 + (k−1)𝟙_D) ∇u·∇v`
pub fn weighted_energy(p: &InclusionProblem, u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(p.weighted_stiffness(&p.inclusion)?.form(u, v))
}

/// `∫_Ω ∇u·∇v`, the homogeneous energy on the inner side.
fn omega_energy(p: &InclusionProblem, u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(p.weighted_stiffness(&BTreeSet::new())?.form(u, v))
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub u_direct: FieldVector,
    /// `Tr_i u` on ∂Ω, the measured Dirichlet data.
    pub f: TraceVector,
    /// `Ṡ_∂Ω g − Ḋ_∂Ω f`
    pub h: FieldVector,
    pub phi: CotraceVector,
    /// `H − Ṡ_∂D φ`, in the ∂Ω numbering.
    pub u_rep: FieldVector,
    pub report: ReconstructionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub k: f64,
    pub spectral_parameter: f64,
    pub boundary_nodes: usize,
    pub inclusion_nodes: usize,
    /// `‖∇(u_rep − u)‖_{L²(Ω)} / ‖∇u‖_{L²(Ω)}`
    pub relative_error: f64,
    /// Standard deviation of `u_rep` over exterior nodes.
    pub exterior_spread: f64,
    /// Range of `u` over Ω.
    pub interior_range: f64,
    pub phi_residual: f64,
    pub runtime_ms: f64,
}

/// `(k+1)/(2(k−1))`, the spectral parameter of the density equation.
pub fn spectral_parameter(k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) || k == 1.0 {
        return Err(Error::InvalidArgument(format!("contrast must lie in (0,1) or (1,inf), got {k}")));
    }
    Ok((k + 1.0) / (2.0 * (k - 1.0)))
}

/// Reconstructs the solution from its Cauchy data on ∂Ω via the dotted layer
/// potentials of ∂Ω and ∂D, both truncated by the same box.
pub fn representation_reconstruct(p: &InclusionProblem) -> Result<Reconstruction> {
    let start = Instant::now();
    let mu = spectral_parameter(p.k)?;
    let u_direct = solve_inclusion_direct(p)?;
    let f = trace(&p.dofs, &u_direct, Side::Inner);

    let ctx_o = SolveContext::with_dofs(&p.mesh, &p.dofs, 0.0, SolverKind::Direct)?;
    let s = ctx_o.single_layer(&p.g)?;
    let d = ctx_o.double_layer(&f)?;
    let h: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a - b).collect();

    let incl = p.inclusion.clone();
    let dofs_d = TwoSidedDofMap::with_inside(&p.mesh, |r| incl.contains(&r))?;
    let ctx_d = SolveContext::with_dofs(&p.mesh, &dofs_d, 0.0, SolverKind::Direct)?;
    let h_vertices = p.dofs.vertex_values(&h, Side::Inner);
    let h_d = dofs_d.continuous(&h_vertices);
    let dh = weak_normal_derivative(ctx_d.forms(), &h_d, Side::Inner)?;

    let kstar = build_operator(&ctx_d, OperatorKind::Kstar)?.matrix;
    let n = kstar.nrows();
    let sys = DMatrix::identity(n, n) * mu + &kstar;
    let rhs = DVector::from_column_slice(&dh);
    let phi = sys
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::OperatorCheck("density system is singular".into()))?;
    let phi_residual = (&sys * &phi - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    let phi = CotraceVector(phi.iter().copied().collect());

    let sd = ctx_d.single_layer_unchecked(&phi)?;
    let sd_vertices = dofs_d.vertex_values(&sd, Side::Inner);
    let sd_o = p.dofs.continuous(&sd_vertices);
    let u_rep: Vec<f64> = h.iter().zip(&sd_o).map(|(a, b)| a - b).collect();

    let diff: Vec<f64> = u_rep.iter().zip(&u_direct).map(|(a, b)| a - b).collect();
    let err = omega_energy(p, &diff, &diff)?.max(0.0).sqrt();
    let norm = omega_energy(p, &u_direct, &u_direct)?.max(0.0).sqrt();
    let relative_error = if norm > 0.0 { err / norm } else { err };

    let exterior: Vec<f64> = p.dofs.interior_dofs(Side::Outer).iter().map(|&d| u_rep[d]).collect();
    let (all, _) = inner_dofs(&p.dofs);
    let (lo, hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(u_direct[d]), hi.max(u_direct[d])));
    let report = ReconstructionReport {
        k: p.k,
        spectral_parameter: mu,
        boundary_nodes: p.dofs.num_interface(),
        inclusion_nodes: n,
        relative_error,
        exterior_spread: std_dev(&exterior),
        interior_range: hi - lo,
        phi_residual,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(Reconstruction { u_direct, f, h, phi, u_rep, report })
}

fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub k: f64,
    pub d1: Vec<u32>,
    pub d2: Vec<u32>,
    /// Left minus right side of the energy identity, relative to the
    /// weighted energy of `u₁`.
    pub identity_residual: f64,
    /// `‖Tr u₁ − Tr u₂‖` in the homogeneous inner trace norm.
    pub boundary_gap: f64,
    pub energy_u1: f64,
    pub energy_u2: f64,
    pub runtime_ms: f64,
}

/// Solves with `D₁ ⊆ D₂` and evaluates the energy identity obtained by
/// testing the difference of the two weak forms with `u₁ − u₂`.
pub fn monotone_experiment(p: &InclusionProblem, d1: &BTreeSet<Region>, d2: &BTreeSet<Region>) -> Result<MonotoneReport> {
    let start = Instant::now();
    if !d1.is_subset(d2) {
        return Err(Error::InvalidArgument("the first inclusion must be contained in the second".into()));
    }
    let p1 = p.with_inclusion(d1.iter().copied())?;
    let p2 = p.with_inclusion(d2.iter().copied())?;
    let (u1, a1) = solve_weighted(&p1, d1)?;
    let (u2, a2) = solve_weighted(&p2, d2)?;
    let k = p.k;

    let diff: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
    let shell: BTreeSet<Region> = d2.difference(d1).copied().collect();
    let coeffs = shell.iter().fold(RegionCoeffs::new(), |c, &r| c.with(r, 1.0));
    let s = assemble(&p.mesh, &p.dofs, Form::Stiffness, &coeffs, View::TwoSided)?;
    let lhs = a1.form(&diff, &diff) + (k - 1.0) * s.form(&u2, &u2);
    let rhs = (k - 1.0) * s.form(&u2, &u1);
    let energy_u1 = a1.form(&u1, &u1);
    let energy_u2 = a2.form(&u2, &u2);
    let scale = energy_u1.max(energy_u2).max(f64::MIN_POSITIVE);

    let forms = SideForms::new(&p.mesh, &p.dofs, 0.0, SolverKind::Direct)?;
    let gram = trace_gram(&forms, GramSide::Inner)?;
    let gap = trace(&p.dofs, &diff, Side::Inner);
    Ok(MonotoneReport {
        k,
        d1: d1.iter().map(|r| r.code()).collect(),
        d2: d2.iter().map(|r| r.code()).collect(),
        identity_residual: (lhs - rhs).abs() / scale,
        boundary_gap: gram.norm(&gap),
        energy_u1,
        energy_u2,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
