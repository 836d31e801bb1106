//! Variational solution operators on the two-sided space: Dirichlet and
//! Neumann solves, single and double layer potentials, and the orthogonal
//! splitting of two-sided harmonic fields.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{assemble, FieldVector, Factorization, Form, RegionCoeffs, SolverKind, View, DEFAULT_TOL};
use crate::mesh::{build_dof_map, Side, TriMesh, TwoSidedDofMap};
use crate::spaces::{jump_flux, jump_trace, trace, weak_normal_derivative, CotraceVector, SideForms, TraceVector};

/// Columns per batch in operator builds; bounds the dense scratch to
/// `num_dofs × BLOCK`.
pub(crate) const BLOCK: usize = 64;

/// Everything needed to apply the solution operators for one interface and
/// one spectral parameter `k`: side matrices, the global (identified)
/// matrix and their factorizations.
///
/// For `k = 0` the box boundary condition makes the global and outer
/// problems definite; only the bounded inner side needs a gauge, which pins
/// the mean of the trace.
#[derive(Debug)]
pub struct SolveContext {
    forms: SideForms,
    free: Vec<usize>,
    free_pos: Vec<Option<usize>>,
    global: Factorization,
    neumann: [(Vec<usize>, Factorization); 2],
}

impl SolveContext {
    /// Context for the main interface of `mesh`.
    pub fn new(mesh: &TriMesh, k: f64) -> Result<Self> {
        Self::with_dofs(mesh, &build_dof_map(mesh)?, k, SolverKind::Direct)
    }

    pub fn with_dofs(mesh: &TriMesh, dofs: &TwoSidedDofMap, k: f64, solver: SolverKind) -> Result<Self> {
        let forms = SideForms::new(mesh, dofs, k, solver)?;
        let all = RegionCoeffs::uniform(mesh, 1.0, |_| true);
        let mut a = assemble(mesh, dofs, Form::Stiffness, &all, View::Identified)?;
        if k != 0.0 {
            a = a.add_scaled(k, &assemble(mesh, dofs, Form::Mass, &all, View::Identified)?);
        }
        let free = dofs.free_identified();
        let mut free_pos = vec![None; dofs.num_identified()];
        for (i, &v) in free.iter().enumerate() {
            free_pos[v] = Some(i);
        }
        let global = Factorization::new(a.principal(&free), solver, DEFAULT_TOL)?;
        let neumann = [Side::Inner, Side::Outer].map(|side| {
            let mut idx: Vec<usize> = forms.interior_dofs(side).to_vec();
            let gamma = forms.interface_dofs(side);
            // pin the first interface node of the bounded side when k = 0
            let pin = side == Side::Inner && k == 0.0;
            idx.extend(gamma.iter().skip(usize::from(pin)));
            let f = Factorization::new(forms.matrix(side).principal(&idx), solver, DEFAULT_TOL);
            f.map(|f| (idx, f))
        });
        let [n_in, n_out] = neumann;
        Ok(SolveContext { forms, free, free_pos, global, neumann: [n_in?, n_out?] })
    }

    pub fn forms(&self) -> &SideForms {
        &self.forms
    }

    pub fn dofs(&self) -> &TwoSidedDofMap {
        self.forms.dofs()
    }

    pub fn mesh(&self) -> &TriMesh {
        self.forms.mesh()
    }

    pub fn k(&self) -> f64 {
        self.forms.k()
    }

    pub fn num_interface(&self) -> usize {
        self.forms.num_interface()
    }

    fn check_trace(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.num_interface() {
            return Err(Error::Dimension { expected: self.num_interface(), got: f.len() });
        }
        Ok(())
    }

    /// Minimal-energy (discrete k-harmonic) extension of `f` into `side`.
    pub fn dirichlet_solve(&self, f: &TraceVector, side: Side) -> Result<FieldVector> {
        self.check_trace(f)?;
        self.forms.min_extension(f, side)
    }

    /// Solves `a_side(u, v) = ⟨g, Tr v⟩` on `side`. For `k = 0` the data must
    /// be mean-zero; on the inner side the solution is normalized to a
    /// mean-zero trace.
    pub fn neumann_solve(&self, g: &CotraceVector, side: Side) -> Result<FieldVector> {
        self.check_trace(g)?;
        if self.k() == 0.0 {
            g.check_compatible()?;
        }
        let s = match side {
            Side::Inner => 0,
            Side::Outer => 1,
        };
        let (idx, fact) = &self.neumann[s];
        let gamma = self.forms.interface_dofs(side);
        let mut pos = vec![None; self.dofs().num_dofs()];
        for (i, &d) in idx.iter().enumerate() {
            pos[d] = Some(i);
        }
        let mut rhs = vec![0.0; idx.len()];
        for (j, &d) in gamma.iter().enumerate() {
            if let Some(i) = pos[d] {
                rhs[i] += g[j];
            }
        }
        let x = fact.solve(&rhs)?;
        let mut u = vec![0.0; self.dofs().num_dofs()];
        for (i, &d) in idx.iter().enumerate() {
            u[d] = x[i];
        }
        if side == Side::Inner && self.k() == 0.0 {
            let mean = gamma.iter().map(|&d| u[d]).sum::<f64>() / gamma.len() as f64;
            let mut touched = self.forms.interior_dofs(side).to_vec();
            touched.extend_from_slice(gamma);
            for d in touched {
                u[d] -= mean;
            }
        }
        Ok(u)
    }

    /// Single layer potential: the continuous field whose flux jump is `g`.
    pub fn single_layer(&self, g: &CotraceVector) -> Result<FieldVector> {
        if self.k() == 0.0 {
            g.check_compatible()?;
        }
        self.single_layer_unchecked(g)
    }

    /// Single layer without the homogeneous compatibility check. The box
    /// condition keeps the truncated problem well posed for any `g`; operator
    /// builds need the full basis.
    pub(crate) fn single_layer_unchecked(&self, g: &[f64]) -> Result<FieldVector> {
        self.check_trace(g)?;
        let cols = self.single_layer_columns(&DMatrix::from_column_slice(g.len(), 1, g))?;
        Ok(cols.column(0).iter().copied().collect())
    }

    /// Double layer potential: outer interface values are pinned to
    /// `inner + f`, so `⟦Tr u⟧ = −f` exactly and the flux jump vanishes.
    pub fn double_layer(&self, f: &TraceVector) -> Result<FieldVector> {
        self.check_trace(f)?;
        let cols = self.double_layer_columns(&DMatrix::from_column_slice(f.len(), 1, f))?;
        Ok(cols.column(0).iter().copied().collect())
    }

    /// `D f + S g`.
    pub fn transmission_solve(&self, f: &TraceVector, g: &CotraceVector) -> Result<FieldVector> {
        let d = self.double_layer(f)?;
        let s = self.single_layer(g)?;
        Ok(d.iter().zip(&s).map(|(a, b)| a + b).collect())
    }

    /// Splits a two-sided harmonic field into its single and double layer parts.
    pub fn project_split(&self, u: &[f64]) -> Result<(FieldVector, FieldVector)> {
        let g = jump_flux(&self.forms, u)?;
        let f = jump_trace(self.dofs(), u);
        let us = self.single_layer_unchecked(&g)?;
        let minus_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let ud = self.double_layer(&TraceVector(minus_f))?;
        Ok((us, ud))
    }

    /// Dirichlet-to-Neumann map of the inner side, column by column.
    pub fn steklov_poincare(&self) -> Result<DMatrix<f64>> {
        let n = self.num_interface();
        let mut a = DMatrix::zeros(n, n);
        for (start, e) in unit_blocks(n) {
            let u = self.forms.min_extension_columns(&e, Side::Inner)?;
            let g = self.normal_derivative_columns(&u, Side::Inner)?;
            a.columns_mut(start, e.ncols()).copy_from(&g);
        }
        Ok(a)
    }

    /// Single layer applied to each column of `g` (`n_Γ × m`), without the
    /// compatibility check.
    pub fn single_layer_columns(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let dofs = self.dofs();
        let mut rhs = DMatrix::zeros(self.free.len(), g.ncols());
        for (i, &v) in dofs.interface_nodes().iter().enumerate() {
            if let Some(r) = self.free_pos[v] {
                rhs.row_mut(r).copy_from(&g.row(i));
            }
        }
        let x = self.global.solve_columns(&rhs)?;
        let mut u = DMatrix::zeros(dofs.num_dofs(), g.ncols());
        for (r, &v) in self.free.iter().enumerate() {
            u.row_mut(v).copy_from(&x.row(r));
            if let Some(i) = dofs.interface_slot(v) {
                u.row_mut(dofs.num_identified() + i).copy_from(&x.row(r));
            }
        }
        Ok(u)
    }

    /// Double layer applied to each column of `f` (`n_Γ × m`).
    pub fn double_layer_columns(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let dofs = self.dofs();
        let n = dofs.num_dofs();
        let outer = self.forms.interface_dofs(Side::Outer);
        let a_out = self.forms.matrix(Side::Outer);
        let mut rhs = DMatrix::zeros(self.free.len(), f.ncols());
        for j in 0..f.ncols() {
            let mut big_f = vec![0.0; n];
            for (i, &d) in outer.iter().enumerate() {
                big_f[d] = f[(i, j)];
            }
            let y = dofs.restrict_sum(&a_out.mul_vec(&big_f));
            for (r, &v) in self.free.iter().enumerate() {
                rhs[(r, j)] = -y[v];
            }
        }
        let x = self.global.solve_columns(&rhs)?;
        let mut u = DMatrix::zeros(n, f.ncols());
        for (r, &v) in self.free.iter().enumerate() {
            u.row_mut(v).copy_from(&x.row(r));
            if let Some(i) = dofs.interface_slot(v) {
                u.row_mut(dofs.num_identified() + i).copy_from(&x.row(r));
            }
        }
        for (i, &d) in outer.iter().enumerate() {
            for j in 0..f.ncols() {
                u[(d, j)] += f[(i, j)];
            }
        }
        Ok(u)
    }

    /// Traces of each column of `u` on `side`.
    pub fn trace_columns(&self, u: &DMatrix<f64>, side: Side) -> DMatrix<f64> {
        let gamma = self.forms.interface_dofs(side);
        DMatrix::from_fn(gamma.len(), u.ncols(), |i, j| u[(gamma[i], j)])
    }

    /// Weak normal derivatives of each column of `u` on `side`, checking
    /// that every column is discretely harmonic there.
    pub fn normal_derivative_columns(&self, u: &DMatrix<f64>, side: Side) -> Result<DMatrix<f64>> {
        let gamma = self.forms.interface_dofs(side);
        let mut g = DMatrix::zeros(gamma.len(), u.ncols());
        for j in 0..u.ncols() {
            let col: Vec<f64> = u.column(j).iter().copied().collect();
            let gj = weak_normal_derivative(&self.forms, &col, side)?;
            g.column_mut(j).copy_from_slice(&gj);
        }
        Ok(g)
    }

    /// Trace of `u` on `side` (convenience over [`trace`]).
    pub fn trace(&self, u: &[f64], side: Side) -> TraceVector {
        trace(self.dofs(), u, side)
    }
}

/// Identity columns in blocks of [`BLOCK`]: `(first column, n × m block)`.
pub(crate) fn unit_blocks(n: usize) -> impl Iterator<Item = (usize, DMatrix<f64>)> {
    (0..n).step_by(BLOCK).map(move |start| {
        let m = BLOCK.min(n - start);
        (start, DMatrix::from_fn(n, m, |i, j| if i == start + j { 1.0 } else { 0.0 }))
    })
}

/// Energy inner product over both sides, `⟨u, v⟩` in the broken space.
pub fn energy_product(ctx: &SolveContext, u: &[f64], v: &[f64]) -> f64 {
    ctx.forms().energy_form(Side::Inner, u, v) + ctx.forms().energy_form(Side::Outer, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_interface, triangulate_two_sided, InterfaceShape};
    use crate::spaces::{dual_norm, trace_gram, GramSide};

    fn ctx(k: f64) -> SolveContext {
        let sq = make_interface(&InterfaceShape::Square { side: 1.0 }).unwrap();
        let m = triangulate_two_sided(&sq, 2.0, 0.2, 0.3).unwrap();
        SolveContext::new(&m, k).unwrap()
    }

    fn wave(n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.9 + phase).sin() + 0.3 * (i as f64 * 2.1).cos()).collect()
    }

    #[test]
    fn layer_potentials_have_the_prescribed_jumps() {
        for k in [0.0, 1.0] {
            let c = ctx(k);
            let n = c.num_interface();
            let g = CotraceVector(wave(n, 0.2)).mean_zero();
            let s = c.single_layer(&g).unwrap();
            assert!(jump_trace(c.dofs(), &s).iter().all(|&x| x == 0.0));
            let jf = jump_flux(c.forms(), &s).unwrap();
            assert!(jf.iter().zip(g.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
            let f = TraceVector(wave(n, 1.0));
            let d = c.double_layer(&f).unwrap();
            let jt = jump_trace(c.dofs(), &d);
            assert!(jt.iter().zip(f.iter()).all(|(a, b)| (a + b).abs() < 1e-14));
            assert!(jump_flux(c.forms(), &d).unwrap().iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn neumann_and_dirichlet_isometries() {
        let c = ctx(1.0);
        let n = c.num_interface();
        let t = trace_gram(c.forms(), GramSide::Inner).unwrap();
        let g = CotraceVector(wave(n, 0.5));
        let u = c.neumann_solve(&g, Side::Inner).unwrap();
        let e = c.forms().energy_form(Side::Inner, &u, &u).sqrt();
        assert!((e - dual_norm(&g, &t).unwrap()).abs() < 1e-10 * e);
        let back = weak_normal_derivative(c.forms(), &u, Side::Inner).unwrap();
        assert!(back.iter().zip(g.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        let f = TraceVector(wave(n, 0.1));
        let u = c.dirichlet_solve(&f, Side::Inner).unwrap();
        let e = c.forms().energy_form(Side::Inner, &u, &u).sqrt();
        assert!((e - t.norm(&f)).abs() < 1e-10 * e);
    }

    #[test]
    fn homogeneous_compatibility_and_constants() {
        let c = ctx(0.0);
        let n = c.num_interface();
        let ones = CotraceVector(vec![1.0; n]);
        assert!(matches!(c.single_layer(&ones), Err(Error::Compatibility(_))));
        assert!(matches!(c.neumann_solve(&ones, Side::Inner), Err(Error::Compatibility(_))));
        let u = c.dirichlet_solve(&TraceVector(vec![2.5; n]), Side::Inner).unwrap();
        for t in 0..c.mesh().num_triangles() {
            if c.dofs().triangle_side(t) == Side::Inner {
                assert!(c.dofs().triangle_dofs(t).iter().all(|&d| (u[d] - 2.5).abs() < 1e-12));
            }
        }
        let a0 = c.steklov_poincare().unwrap();
        let row_sums = a0.column_sum();
        assert!(row_sums.amax() < 1e-10);
    }

    #[test]
    fn split_recovers_components() {
        let c = ctx(1.0);
        let n = c.num_interface();
        let f = TraceVector(wave(n, 0.3));
        let g = CotraceVector(wave(n, 2.0));
        let u = c.transmission_solve(&f, &g).unwrap();
        let (us, ud) = c.project_split(&u).unwrap();
        let s = c.single_layer(&g).unwrap();
        let d = c.double_layer(&f).unwrap();
        assert!(us.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!(ud.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-10));
        let ip = energy_product(&c, &us, &ud).abs();
        let scale = energy_product(&c, &us, &us).sqrt() * energy_product(&c, &ud, &ud).sqrt();
        assert!(ip <= 1e-10 * scale, "{ip} vs {scale}");
    }
}
