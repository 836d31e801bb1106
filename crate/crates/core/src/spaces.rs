//! Discrete trace spaces and their duals.
//!
//! Traces are nodal values on the interface nodes, cotraces are nodal
//! functionals paired with traces by the plain dot product, and trace norms
//! are minimal-extension energies, i.e. Schur complements of the side
//! matrices onto the interface.

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble, FieldVector, Factorization, Form, RegionCoeffs, SolverKind, SparseSymMatrix, View, DEFAULT_TOL};
use crate::linalg::{cholesky, dot, mat_vec, subtract_mean};
use crate::mesh::{Side, TriMesh, TwoSidedDofMap};

/// Relative residual above which a field is not considered discretely harmonic.
pub const HARMONIC_TOL: f64 = 1e-9;

/// Relative size of `Σg` above which a cotrace is not mean-zero.
pub const COMPATIBILITY_TOL: f64 = 1e-9;

macro_rules! nodal_vector {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }

        impl $name {
            pub fn zeros(n: usize) -> Self {
                $name(vec![0.0; n])
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            /// Copy with the mean removed (the gauge of the homogeneous setting).
            pub fn mean_zero(&self) -> Self {
                let mut v = self.0.clone();
                subtract_mean(&mut v);
                $name(v)
            }
        }
    };
}

nodal_vector!(TraceVector);
nodal_vector!(CotraceVector);

impl CotraceVector {
    /// `⟨g, f⟩`, the nodal dual pairing.
    pub fn pair(&self, f: &TraceVector) -> f64 {
        dot(self, f)
    }

    /// Fails unless the coefficients sum to zero (relative to their size).
    pub fn check_compatible(&self) -> Result<()> {
        let s: f64 = self.iter().sum();
        let scale: f64 = self.iter().map(|x| x.abs()).sum();
        if s.abs() > COMPATIBILITY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Compatibility(s));
        }
        Ok(())
    }
}

/// Which side(s) a trace Gram measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramSide {
    Inner,
    Outer,
    TwoSided,
}

/// Dense Gram matrix of a trace norm: `‖f‖² = fᵀ T f`.
#[derive(Debug, Clone)]
pub struct TraceGram {
    pub matrix: DMatrix<f64>,
    pub side: GramSide,
    pub k: f64,
}

impl TraceGram {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Singular with constants in the kernel (homogeneous inner side).
    pub fn is_gauged(&self) -> bool {
        self.k == 0.0 && self.side == GramSide::Inner
    }

    pub fn norm(&self, f: &TraceVector) -> f64 {
        dot(f, &mat_vec(&self.matrix, f)).max(0.0).sqrt()
    }

    /// `T⁻¹ g`; in the gauged case `g` must be mean-zero and the mean-zero
    /// preimage is returned.
    pub fn solve(&self, g: &CotraceVector) -> Result<TraceVector> {
        if g.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: g.len() });
        }
        if self.is_gauged() {
            g.check_compatible()?;
            let n = self.dim() as f64;
            let shift = self.matrix.diagonal().mean();
            let m = &self.matrix + DMatrix::from_element(self.dim(), self.dim(), shift / n);
            let mut x: Vec<f64> = cholesky(&m, "gauged trace Gram")?
                .solve(&nalgebra::DVector::from_column_slice(g))
                .iter()
                .copied()
                .collect();
            subtract_mean(&mut x);
            return Ok(TraceVector(x));
        }
        let x = cholesky(&self.matrix, "trace Gram")?.solve(&nalgebra::DVector::from_column_slice(g));
        Ok(TraceVector(x.iter().copied().collect()))
    }
}

/// Interface node values of `u` seen from `side`, in interface order.
pub fn trace(dofs: &TwoSidedDofMap, u: &[f64], side: Side) -> TraceVector {
    TraceVector(dofs.interface_dofs(side).iter().map(|&d| u[d]).collect())
}

/// `Tr_i u − Tr_e u`.
pub fn jump_trace(dofs: &TwoSidedDofMap, u: &[f64]) -> TraceVector {
    let (i, e) = (trace(dofs, u, Side::Inner), trace(dofs, u, Side::Outer));
    TraceVector(i.iter().zip(e.iter()).map(|(a, b)| a - b).collect())
}

/// Dual norm `sqrt(gᵀ T⁻¹ g)`.
pub fn dual_norm(g: &CotraceVector, t: &TraceGram) -> Result<f64> {
    let x = t.solve(g)?;
    Ok(dot(g, &x).max(0.0).sqrt())
}

/// Side matrices (stiffness + k·mass) of one interface, with the interior
/// blocks factored for minimal extensions.
///
/// The truncation box boundary carries a homogeneous Dirichlet condition in
/// every mode.
#[derive(Debug)]
pub struct SideForms {
    mesh: TriMesh,
    dofs: TwoSidedDofMap,
    k: f64,
    side_matrix: [SparseSymMatrix; 2],
    interior: [Vec<usize>; 2],
    interface: [Vec<usize>; 2],
    interior_fact: [Factorization; 2],
    solver: SolverKind,
}

fn idx(side: Side) -> usize {
    match side {
        Side::Inner => 0,
        Side::Outer => 1,
    }
}

impl SideForms {
    pub fn new(mesh: &TriMesh, dofs: &TwoSidedDofMap, k: f64, solver: SolverKind) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("spectral parameter k = {k} must be >= 0")));
        }
        let side_matrix = [side_matrix(mesh, dofs, k, Side::Inner)?, side_matrix(mesh, dofs, k, Side::Outer)?];
        let interior = [dofs.interior_dofs(Side::Inner), dofs.interior_dofs(Side::Outer)];
        let interface = [dofs.interface_dofs(Side::Inner), dofs.interface_dofs(Side::Outer)];
        let f_in = Factorization::new(side_matrix[0].principal(&interior[0]), solver, DEFAULT_TOL)?;
        let f_out = Factorization::new(side_matrix[1].principal(&interior[1]), solver, DEFAULT_TOL)?;
        Ok(SideForms {
            mesh: mesh.clone(),
            dofs: dofs.clone(),
            k,
            side_matrix,
            interior,
            interface,
            interior_fact: [f_in, f_out],
            solver,
        })
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

    pub fn solver(&self) -> SolverKind {
        self.solver
    }

    pub fn is_homogeneous(&self) -> bool {
        self.k == 0.0
    }

    pub fn num_interface(&self) -> usize {
        self.dofs.num_interface()
    }

    /// Side matrix on the two-sided DOF numbering.
    pub fn matrix(&self, side: Side) -> &SparseSymMatrix {
        &self.side_matrix[idx(side)]
    }

    pub fn interior_dofs(&self, side: Side) -> &[usize] {
        &self.interior[idx(side)]
    }

    pub fn interface_dofs(&self, side: Side) -> &[usize] {
        &self.interface[idx(side)]
    }

    /// `a_side(u, v)`.
    pub fn energy_form(&self, side: Side, u: &[f64], v: &[f64]) -> f64 {
        self.matrix(side).form(u, v)
    }

    /// `‖u‖²` over both sides (the broken energy).
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.energy_form(Side::Inner, u, u) + self.energy_form(Side::Outer, u, u)
    }

    /// Largest interior residual of `u` on `side`, relative to `‖A‖‖u‖`.
    pub fn harmonic_residual(&self, u: &[f64], side: Side) -> f64 {
        let a = self.matrix(side);
        let au = a.mul_vec(u);
        let r = self.interior_dofs(side).iter().map(|&d| au[d].abs()).fold(0.0, f64::max);
        let scale = a.norm_inf() * u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            r / scale
        }
    }

    pub(crate) fn check_harmonic(&self, u: &[f64], side: Side) -> Result<()> {
        let r = self.harmonic_residual(u, side);
        if r > HARMONIC_TOL {
            return Err(Error::NotHarmonic { side: side.name(), residual: r });
        }
        Ok(())
    }

    /// Minimal-energy extension of `f` into `side`; zero on the other side
    /// and on the box.
    pub fn min_extension(&self, f: &TraceVector, side: Side) -> Result<FieldVector> {
        let n = self.num_interface();
        if f.len() != n {
            return Err(Error::Dimension { expected: n, got: f.len() });
        }
        let cols = self.min_extension_columns(&DMatrix::from_column_slice(n, 1, f), side)?;
        Ok(cols.column(0).iter().copied().collect())
    }

    /// Column-wise minimal extensions of the traces in `f` (`n_Γ × m`),
    /// returned as two-sided fields (`num_dofs × m`).
    pub fn min_extension_columns(&self, f: &DMatrix<f64>, side: Side) -> Result<DMatrix<f64>> {
        let s = idx(side);
        let (gamma, interior) = (&self.interface[s], &self.interior[s]);
        let a = &self.side_matrix[s];
        let m = f.ncols();
        // rhs = −A_BΓ f
        let a_bg = a.sparse_block(interior, gamma);
        let mut rhs = DMatrix::zeros(interior.len(), m);
        for (r, row) in a_bg.iter().enumerate() {
            for &(c, v) in row {
                for j in 0..m {
                    rhs[(r, j)] -= v * f[(c, j)];
                }
            }
        }
        let ub = self.interior_fact[s].solve_columns(&rhs)?;
        let mut u = DMatrix::zeros(self.dofs.num_dofs(), m);
        for (r, &d) in interior.iter().enumerate() {
            for j in 0..m {
                u[(d, j)] = ub[(r, j)];
            }
        }
        for (c, &d) in gamma.iter().enumerate() {
            for j in 0..m {
                u[(d, j)] = f[(c, j)];
            }
        }
        Ok(u)
    }
}

fn side_matrix(mesh: &TriMesh, dofs: &TwoSidedDofMap, k: f64, side: Side) -> Result<SparseSymMatrix> {
    let mut coeffs = RegionCoeffs::new();
    for (t, &r) in mesh.tags().iter().enumerate() {
        if dofs.triangle_side(t) == side && coeffs.get(r).is_none() {
            coeffs = coeffs.with(r, 1.0);
        }
    }
    let stiff = assemble(mesh, dofs, Form::Stiffness, &coeffs, View::TwoSided)?;
    if k == 0.0 {
        return Ok(stiff);
    }
    let mass = assemble(mesh, dofs, Form::Mass, &coeffs, View::TwoSided)?;
    Ok(stiff.add_scaled(k, &mass))
}

/// Weak normal derivative on `side`: `g_j = a_side(u, φ_j)` for the inner
/// side and minus that for the outer side (whose normal points inward).
pub fn weak_normal_derivative(forms: &SideForms, u: &[f64], side: Side) -> Result<CotraceVector> {
    forms.dofs().check_len(u)?;
    forms.check_harmonic(u, side)?;
    let au = forms.matrix(side).mul_vec(u);
    let sign = match side {
        Side::Inner => 1.0,
        Side::Outer => -1.0,
    };
    Ok(CotraceVector(forms.interface_dofs(side).iter().map(|&d| sign * au[d]).collect()))
}

/// `∂_i u/∂ν − ∂_e u/∂ν`.
pub fn jump_flux(forms: &SideForms, u: &[f64]) -> Result<CotraceVector> {
    let gi = weak_normal_derivative(forms, u, Side::Inner)?;
    let ge = weak_normal_derivative(forms, u, Side::Outer)?;
    Ok(CotraceVector(gi.iter().zip(ge.iter()).map(|(a, b)| a - b).collect()))
}

/// Schur-complement Gram of the trace norm on `side`.
pub fn trace_gram(forms: &SideForms, side: GramSide) -> Result<TraceGram> {
    let matrix = match side {
        GramSide::Inner => schur(forms, Side::Inner)?,
        GramSide::Outer => schur(forms, Side::Outer)?,
        GramSide::TwoSided => schur(forms, Side::Inner)? + schur(forms, Side::Outer)?,
    };
    Ok(TraceGram { matrix, side, k: forms.k() })
}

/// `T = A_ΓΓ − A_ΓB A_BB⁻¹ A_BΓ`, computed in column blocks.
fn schur(forms: &SideForms, side: Side) -> Result<DMatrix<f64>> {
    let gamma = forms.interface_dofs(side);
    let n = gamma.len();
    let a = forms.matrix(side);
    let mut t = a.dense_block(gamma, gamma);
    let a_gb = a.sparse_block(gamma, forms.interior_dofs(side));
    const BLOCK: usize = 64;
    let mut start = 0;
    while start < n {
        let m = BLOCK.min(n - start);
        let e = DMatrix::from_fn(n, m, |i, j| if i == start + j { 1.0 } else { 0.0 });
        let u = forms.min_extension_columns(&e, side)?;
        // T e_j = A_ΓΓ e_j + A_ΓB u_B
        let interior = forms.interior_dofs(side);
        for (r, row) in a_gb.iter().enumerate() {
            for &(c, v) in row {
                let d = interior[c];
                for j in 0..m {
                    t[(r, start + j)] += v * u[(d, j)];
                }
            }
        }
        start += m;
    }
    Ok(crate::linalg::symmetrize(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_dof_map, tiny_mesh};

    fn forms(k: f64) -> SideForms {
        let m = tiny_mesh().refine_uniform().refine_uniform();
        let d = build_dof_map(&m).unwrap();
        SideForms::new(&m, &d, k, SolverKind::Direct).unwrap()
    }

    #[test]
    fn traces_of_continuous_and_indicator_fields() {
        let f = forms(1.0);
        let d = f.dofs();
        let ones = vec![1.0; d.num_dofs()];
        assert!(trace(d, &ones, Side::Outer).iter().all(|&x| x == 1.0));
        assert!(jump_trace(d, &ones).iter().all(|&x| x == 0.0));
        let mut ind = vec![0.0; d.num_dofs()];
        for t in 0..f.mesh().num_triangles() {
            if d.triangle_side(t) == Side::Inner {
                for dof in d.triangle_dofs(t) {
                    ind[dof] = 1.0;
                }
            }
        }
        assert!(jump_trace(d, &ind).iter().all(|&x| x == 1.0));
    }

    #[test]
    fn constant_fluxes() {
        let f0 = forms(0.0);
        let ones = vec![1.0; f0.dofs().num_dofs()];
        let g = weak_normal_derivative(&f0, &ones, Side::Inner).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-14));
        let f1 = forms(1.0);
        let g = weak_normal_derivative(&f1, &ones, Side::Inner);
        // constants are not 1-harmonic unless there is no interior node
        assert!(g.is_err() || g.unwrap().iter().any(|x| x.abs() > 0.0));
    }

    #[test]
    fn two_sided_gram_is_sum_and_norm_matches_extension() {
        let f = forms(1.0);
        let ti = trace_gram(&f, GramSide::Inner).unwrap();
        let to = trace_gram(&f, GramSide::Outer).unwrap();
        let t2 = trace_gram(&f, GramSide::TwoSided).unwrap();
        assert!(crate::linalg::max_abs(&(&ti.matrix + &to.matrix - &t2.matrix)) == 0.0);
        let n = f.num_interface();
        let tr = TraceVector((0..n).map(|i| (i as f64 * 0.7).sin()).collect());
        let u = f.min_extension(&tr, Side::Inner).unwrap();
        let e = f.energy_form(Side::Inner, &u, &u);
        assert!((ti.norm(&tr).powi(2) - e).abs() <= 1e-12 * e);
        let g = CotraceVector(mat_vec(&ti.matrix, &tr));
        assert!((dual_norm(&g, &ti).unwrap() - ti.norm(&tr)).abs() < 1e-10 * ti.norm(&tr));
        assert_eq!(dual_norm(&CotraceVector::zeros(n), &ti).unwrap(), 0.0);
    }

    #[test]
    fn homogeneous_inner_gram_has_constant_kernel() {
        let f = forms(0.0);
        let t = trace_gram(&f, GramSide::Inner).unwrap();
        let n = t.dim();
        let ones = TraceVector(vec![1.0; n]);
        assert!(t.norm(&ones) < 1e-7);
        assert!(matches!(t.solve(&CotraceVector(vec![1.0; n])), Err(Error::Compatibility(_))));
    }
}
