//! Boundary layer operators, Calderón projectors, Neumann-Poincaré spectra
//! and the Neumann-series solver.
//!
//! Every matrix is assembled column by column from the variational layer
//! potentials in [`crate::operators`]; nothing here integrates a kernel.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, max_abs, mean_zero_basis, symmetrize};
use crate::mesh::Side;
use crate::operators::{unit_blocks, SolveContext};
use crate::spaces::{trace_gram, CotraceVector, GramSide, TraceVector};

/// Whether a vector space slot holds traces or cotraces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Trace,
    Cotrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    V,
    W,
    K,
    Kstar,
}

/// Dense operator between trace and cotrace spaces.
#[derive(Debug, Clone)]
pub struct TraceOperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub domain: Space,
    pub codomain: Space,
    pub k: f64,
}

impl TraceOperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Writes the matrix row-major with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.matrix.nrows() {
            w.write_record(self.matrix.row(i).iter().map(|x| format!("{x:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// All four boundary operators of one context, plus the one-sided traces
/// and normal derivatives of the layer potentials they are built from.
#[derive(Debug, Clone)]
pub struct BoundaryOperators {
    pub k: f64,
    /// `tr ∘ 𝒮`
    pub v: DMatrix<f64>,
    /// `−∂/∂ν ∘ 𝒟`
    pub w: DMatrix<f64>,
    /// `½(Tr_i + Tr_e) ∘ 𝒟`
    pub k_op: DMatrix<f64>,
    /// Pairing transpose of `k_op`.
    pub k_star: DMatrix<f64>,
    /// `½(∂_i + ∂_e) ∘ 𝒮`, the independent route to `k_star`.
    pub k_star_check: DMatrix<f64>,
    pub tr_inner_d: DMatrix<f64>,
    pub tr_outer_d: DMatrix<f64>,
    pub dn_inner_s: DMatrix<f64>,
    pub dn_outer_s: DMatrix<f64>,
}

impl BoundaryOperators {
    pub fn build(ctx: &SolveContext) -> Result<Self> {
        let n = ctx.num_interface();
        let mut ops = BoundaryOperators {
            k: ctx.k(),
            v: DMatrix::zeros(n, n),
            w: DMatrix::zeros(n, n),
            k_op: DMatrix::zeros(n, n),
            k_star: DMatrix::zeros(n, n),
            k_star_check: DMatrix::zeros(n, n),
            tr_inner_d: DMatrix::zeros(n, n),
            tr_outer_d: DMatrix::zeros(n, n),
            dn_inner_s: DMatrix::zeros(n, n),
            dn_outer_s: DMatrix::zeros(n, n),
        };
        for (start, e) in unit_blocks(n) {
            let m = e.ncols();
            let s = ctx.single_layer_columns(&e)?;
            ops.v.columns_mut(start, m).copy_from(&ctx.trace_columns(&s, Side::Inner));
            ops.dn_inner_s.columns_mut(start, m).copy_from(&ctx.normal_derivative_columns(&s, Side::Inner)?);
            ops.dn_outer_s.columns_mut(start, m).copy_from(&ctx.normal_derivative_columns(&s, Side::Outer)?);
            let d = ctx.double_layer_columns(&e)?;
            ops.tr_inner_d.columns_mut(start, m).copy_from(&ctx.trace_columns(&d, Side::Inner));
            ops.tr_outer_d.columns_mut(start, m).copy_from(&ctx.trace_columns(&d, Side::Outer));
            let dn = ctx.normal_derivative_columns(&d, Side::Inner)?;
            ops.w.columns_mut(start, m).copy_from(&(-dn));
        }
        ops.k_op = (&ops.tr_inner_d + &ops.tr_outer_d) * 0.5;
        ops.k_star = ops.k_op.transpose();
        ops.k_star_check = (&ops.dn_inner_s + &ops.dn_outer_s) * 0.5;
        Ok(ops)
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn get(&self, which: OperatorKind) -> TraceOperatorMatrix {
        let (matrix, domain, codomain) = match which {
            OperatorKind::V => (&self.v, Space::Cotrace, Space::Trace),
            OperatorKind::W => (&self.w, Space::Trace, Space::Cotrace),
            OperatorKind::K => (&self.k_op, Space::Trace, Space::Trace),
            OperatorKind::Kstar => (&self.k_star, Space::Cotrace, Space::Cotrace),
        };
        TraceOperatorMatrix { matrix: matrix.clone(), domain, codomain, k: self.k }
    }

    /// `ℳ = [[−𝒦, 𝒱], [𝒲, 𝒦*]]` acting on `(f, g)`.
    pub fn calderon_m(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(-&self.k_op));
        m.view_mut((0, n), (n, n)).copy_from(&self.v);
        m.view_mut((n, 0), (n, n)).copy_from(&self.w);
        m.view_mut((n, n), (n, n)).copy_from(&self.k_star);
        m
    }

    /// Interior and exterior Calderón projectors `½I ± ℳ`.
    pub fn calderon(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.calderon_m();
        let half = DMatrix::identity(m.nrows(), m.ncols()) * 0.5;
        (&half + &m, &half - &m)
    }

    /// Max-norm residuals of the trace and flux jump relations.
    pub fn jump_residuals(&self) -> JumpResiduals {
        let half = DMatrix::identity(self.dim(), self.dim()) * 0.5;
        JumpResiduals {
            tr_inner: max_abs(&(&self.tr_inner_d - (&self.k_op - &half))),
            tr_outer: max_abs(&(&self.tr_outer_d - (&self.k_op + &half))),
            dn_inner: max_abs(&(&self.dn_inner_s - (&self.k_star + &half))),
            dn_outer: max_abs(&(&self.dn_outer_s - (&self.k_star - &half))),
            k_star_paths: max_abs(&(&self.k_star - &self.k_star_check)),
        }
    }

    /// Max-norm residuals of `ℳ² = ¼I` and its block relations.
    pub fn calderon_residuals(&self) -> CalderonResiduals {
        let n = self.dim();
        let quarter = DMatrix::identity(n, n) * 0.25;
        let m = self.calderon_m();
        let (ci, ce) = self.calderon();
        CalderonResiduals {
            m_squared: max_abs(&(&m * &m - DMatrix::identity(2 * n, 2 * n) * 0.25)),
            kv_vkstar: max_abs(&(&self.k_op * &self.v - &self.v * &self.k_star)),
            wk_kstarw: max_abs(&(&self.w * &self.k_op - &self.k_star * &self.w)),
            k2_vw: max_abs(&(&self.k_op * &self.k_op + &self.v * &self.w - &quarter)),
            kstar2_wv: max_abs(&(&self.k_star * &self.k_star + &self.w * &self.v - &quarter)),
            ci_idempotent: max_abs(&(&ci * &ci - &ci)),
            ce_idempotent: max_abs(&(&ce * &ce - &ce)),
            sum_identity: max_abs(&(&ci + &ce - DMatrix::identity(2 * n, 2 * n))),
        }
    }

    /// Residuals of `𝒜₁ = 𝒱⁻¹(½I + 𝒦)` and `𝒜₁ = 𝒲 + (½I + 𝒦*)𝒱⁻¹(½I + 𝒦)`.
    pub fn steklov_residuals(&self, a1: &DMatrix<f64>) -> Result<(f64, f64)> {
        let n = self.dim();
        let half = DMatrix::identity(n, n) * 0.5;
        let v_chol = cholesky(&self.v, "V")?;
        let vinv_pk = v_chol.solve(&(&half + &self.k_op));
        let r1 = max_abs(&(a1 - &vinv_pk));
        let r2 = max_abs(&(a1 - &self.w - (&half + &self.k_star) * &vinv_pk));
        Ok((r1, r2))
    }

    /// Basis of the subspace the operators act on: everything for `k > 0`,
    /// mean-zero vectors for `k = 0` (where constants are the gauge).
    fn basis(&self) -> DMatrix<f64> {
        if self.k == 0.0 {
            mean_zero_basis(self.dim())
        } else {
            DMatrix::identity(self.dim(), self.dim())
        }
    }

    fn reduced(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let q = self.basis();
        q.transpose() * m * &q
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JumpResiduals {
    /// `Tr_i∘𝒟 − (−½I + 𝒦)`
    pub tr_inner: f64,
    /// `Tr_e∘𝒟 − (½I + 𝒦)`
    pub tr_outer: f64,
    /// `∂_i∘𝒮 − (½I + 𝒦*)`
    pub dn_inner: f64,
    /// `∂_e∘𝒮 − (−½I + 𝒦*)`
    pub dn_outer: f64,
    pub k_star_paths: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalderonResiduals {
    pub m_squared: f64,
    pub kv_vkstar: f64,
    pub wk_kstarw: f64,
    pub k2_vw: f64,
    pub kstar2_wv: f64,
    pub ci_idempotent: f64,
    pub ce_idempotent: f64,
    pub sum_identity: f64,
}

/// Builds one operator. Building several at once through
/// [`BoundaryOperators::build`] shares the layer-potential solves.
pub fn build_operator(ctx: &SolveContext, which: OperatorKind) -> Result<TraceOperatorMatrix> {
    let n = ctx.num_interface();
    let mut m = DMatrix::zeros(n, n);
    for (start, e) in unit_blocks(n) {
        let block = match which {
            OperatorKind::V => ctx.trace_columns(&ctx.single_layer_columns(&e)?, Side::Inner),
            OperatorKind::W => -ctx.normal_derivative_columns(&ctx.double_layer_columns(&e)?, Side::Inner)?,
            OperatorKind::K | OperatorKind::Kstar => {
                let d = ctx.double_layer_columns(&e)?;
                (ctx.trace_columns(&d, Side::Inner) + ctx.trace_columns(&d, Side::Outer)) * 0.5
            }
        };
        m.columns_mut(start, e.ncols()).copy_from(&block);
    }
    let (domain, codomain) = match which {
        OperatorKind::V => (Space::Cotrace, Space::Trace),
        OperatorKind::W => (Space::Trace, Space::Cotrace),
        OperatorKind::K => (Space::Trace, Space::Trace),
        OperatorKind::Kstar => {
            m.transpose_mut();
            (Space::Cotrace, Space::Cotrace)
        }
    };
    Ok(TraceOperatorMatrix { matrix: m, domain, codomain, k: ctx.k() })
}

/// Norms induced by the layer operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InducedNorm {
    /// `⟨𝒲f, f⟩^½` on traces.
    W,
    /// `⟨g, 𝒱g⟩^½` on cotraces.
    V,
    /// `⟨𝒱⁻¹f, f⟩^½` on traces.
    Vinv,
}

/// Induced norm of `x`; in the homogeneous case traces are taken modulo
/// constants and cotraces must be mean-zero.
pub fn induced_norm(ops: &BoundaryOperators, x: &[f64], which: InducedNorm) -> Result<f64> {
    if x.len() != ops.dim() {
        return Err(Error::Dimension { expected: ops.dim(), got: x.len() });
    }
    if x.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let q = ops.basis();
    let xr = q.transpose() * DVector::from_column_slice(x);
    if ops.k == 0.0 && which == InducedNorm::V {
        CotraceVector(x.to_vec()).check_compatible()?;
    }
    let value = match which {
        InducedNorm::W => xr.dot(&(ops.reduced(&ops.w) * &xr)),
        InducedNorm::V => xr.dot(&(ops.reduced(&ops.v) * &xr)),
        InducedNorm::Vinv => xr.dot(&cholesky(&ops.reduced(&ops.v), "V")?.solve(&xr)),
    };
    if !(value > 0.0) {
        if ops.k == 0.0 && xr.norm() <= 1e-12 * DVector::from_column_slice(x).norm() {
            return Ok(0.0);
        }
        return Err(Error::OperatorCheck(format!("{which:?}-norm squared is {value:.3e}, not positive")));
    }
    Ok(value.sqrt())
}

/// Contraction data of `±½I + 𝒦` in the `𝒱⁻¹` inner product.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContractionConstants {
    pub c_plus: f64,
    pub c_minus: f64,
    /// Smallest singular values of `½I + 𝒦` and `−½I + 𝒦` in the same norm.
    pub s_plus: f64,
    pub s_minus: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `½ + sqrt(¼ − 1/(αβ))`.
    pub bound: f64,
}

/// Eigenvalues of `𝒦` in the `𝒱⁻¹` inner product, ascending.
///
/// `𝒦𝒱 = 𝒱𝒦*` makes `𝒦*` self-adjoint for `⟨·, 𝒱·⟩`, so with `𝒱 = LLᵀ`
/// the matrix `Lᵀ𝒦*L⁻ᵀ` is symmetric and shares the spectrum of `𝒦`. For
/// `k = 0` the constant mode (eigenvalue −½, the gauge) is dropped by
/// restricting to mean-zero densities.
pub fn np_spectrum(ops: &BoundaryOperators) -> Result<Vec<f64>> {
    let defect = max_abs(&(&ops.k_op * &ops.v - &ops.v * &ops.k_star));
    let scale = max_abs(&(&ops.v * &ops.k_star)).max(f64::MIN_POSITIVE);
    if defect > 1e-6 * scale {
        return Err(Error::OperatorCheck(format!(
            "symmetrization residual |KV - VK*| = {:.3e} (relative)",
            defect / scale
        )));
    }
    let mut ev = symmetrized_k(ops)?.eigenvalues.iter().copied().collect::<Vec<_>>();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn symmetrized_k(ops: &BoundaryOperators) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let v = ops.reduced(&ops.v);
    let ks = ops.reduced(&ops.k_star);
    let l = cholesky(&v, "V")?.l();
    let lt = l.transpose();
    // Lᵀ K* L⁻ᵀ = (L⁻¹ (Lᵀ K*)ᵀ)ᵀ
    let a = &lt * &ks;
    let s = l
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| Error::OperatorCheck("singular Cholesky factor of V".into()))?
        .transpose();
    Ok(SymmetricEigen::new(symmetrize(&s)))
}

/// Measured contraction constants and the constants `α`, `β` comparing the
/// `𝒱` and `𝒲` norms with the inner trace norm.
pub fn contraction_constants(ctx: &SolveContext, ops: &BoundaryOperators) -> Result<ContractionConstants> {
    let ev = np_spectrum(ops)?;
    let c_plus = ev.iter().map(|l| (0.5 + l).abs()).fold(0.0, f64::max);
    let c_minus = ev.iter().map(|l| (-0.5 + l).abs()).fold(0.0, f64::max);
    let s_plus = ev.iter().map(|l| (0.5 + l).abs()).fold(f64::INFINITY, f64::min);
    let s_minus = ev.iter().map(|l| (-0.5 + l).abs()).fold(f64::INFINITY, f64::min);

    let t = ops.reduced(&trace_gram(ctx.forms(), GramSide::Inner)?.matrix);
    let lt = cholesky(&t, "inner trace Gram")?.l();
    // dual-norm comparison: gᵀVg against gᵀT⁻¹g, i.e. eig(Ltᵀ V Lt)
    let mv = lt.transpose() * ops.reduced(&ops.v) * &lt;
    let mu = SymmetricEigen::new(symmetrize(&mv)).eigenvalues;
    let alpha = mu.max().max(1.0 / mu.min());
    // trace-norm comparison: fᵀWf against fᵀTf, i.e. eig(Lt⁻¹ W Lt⁻ᵀ)
    let x = lt
        .solve_lower_triangular(&ops.reduced(&ops.w))
        .ok_or_else(|| Error::OperatorCheck("singular trace Gram factor".into()))?;
    let mw = lt
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::OperatorCheck("singular trace Gram factor".into()))?;
    let nu = SymmetricEigen::new(symmetrize(&mw)).eigenvalues;
    let beta = nu.max().max(1.0 / nu.min());
    let ab = (alpha * beta).max(4.0);
    Ok(ContractionConstants {
        c_plus,
        c_minus,
        s_plus,
        s_minus,
        alpha,
        beta,
        bound: 0.5 + (0.25 - 1.0 / ab).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesSign {
    /// Iterates `½I + 𝒦`, solving `(½I − 𝒦)f = φ`.
    Plus,
    /// Iterates `½I − 𝒦`, solving `(½I + 𝒦)f = φ`.
    Minus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesResult {
    pub solution: TraceVector,
    pub iterations: usize,
    /// Relative `𝒱⁻¹` residual after each partial sum.
    pub residuals: Vec<f64>,
}

impl SeriesResult {
    /// Successive residual ratios.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Partial sums `f_N = Σ_{ℓ≤N} X^ℓ φ` with `X = ½I ± 𝒦`, stopped once the
/// residual of the second-kind equation drops below `tol` relative to `φ`
/// in the `𝒱⁻¹` norm.
pub fn neumann_series_solve(
    ops: &BoundaryOperators,
    phi: &TraceVector,
    sign: SeriesSign,
    tol: f64,
    max_iter: usize,
) -> Result<SeriesResult> {
    let n = ops.dim();
    if phi.len() != n {
        return Err(Error::Dimension { expected: n, got: phi.len() });
    }
    let s = match sign {
        SeriesSign::Plus => 1.0,
        SeriesSign::Minus => -1.0,
    };
    let x_op = DMatrix::identity(n, n) * 0.5 + &ops.k_op * s;
    let lhs = DMatrix::identity(n, n) - &x_op;
    let phi_v = DVector::from_column_slice(phi);
    let phi_norm = induced_norm(ops, phi, InducedNorm::Vinv)?;
    if phi_norm == 0.0 {
        return Ok(SeriesResult { solution: TraceVector::zeros(n), iterations: 1, residuals: vec![0.0] });
    }
    let mut term = phi_v.clone();
    let mut f = phi_v.clone();
    let mut residuals = Vec::new();
    for it in 1..=max_iter {
        let r: Vec<f64> = (&lhs * &f - &phi_v).iter().copied().collect();
        let rel = induced_norm(ops, &r, InducedNorm::Vinv)? / phi_norm;
        residuals.push(rel);
        if rel <= tol {
            return Ok(SeriesResult { solution: TraceVector(f.iter().copied().collect()), iterations: it, residuals });
        }
        term = &x_op * term;
        f += &term;
    }
    let ratio = match residuals.len() {
        0 | 1 => f64::NAN,
        l => residuals[l - 1] / residuals[l - 2],
    };
    Err(Error::SeriesDiverged { iterations: max_iter, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_interface, triangulate_two_sided, InterfaceShape};

    fn ops(k: f64) -> (SolveContext, BoundaryOperators) {
        let sq = make_interface(&InterfaceShape::Square { side: 1.0 }).unwrap();
        let m = triangulate_two_sided(&sq, 2.0, 0.2, 0.3).unwrap();
        let ctx = SolveContext::new(&m, k).unwrap();
        let ops = BoundaryOperators::build(&ctx).unwrap();
        (ctx, ops)
    }

    #[test]
    fn calderon_identities_hold_to_roundoff() {
        for k in [0.0, 1.0] {
            let (ctx, o) = ops(k);
            let j = o.jump_residuals();
            assert!(j.tr_inner < 1e-12 && j.tr_outer < 1e-12, "{j:?}");
            assert!(j.dn_inner < 1e-8 && j.dn_outer < 1e-8, "{j:?}");
            let c = o.calderon_residuals();
            assert!(c.m_squared < 1e-8 && c.ci_idempotent < 1e-8, "{c:?}");
            assert_eq!(c.sum_identity, 0.0);
            if k == 1.0 {
                let a1 = ctx.steklov_poincare().unwrap();
                let (r1, r2) = o.steklov_residuals(&a1).unwrap();
                assert!(r1 < 1e-6 && r2 < 1e-6);
            }
        }
    }

    #[test]
    fn single_operator_builds_match_the_batch() {
        let (ctx, o) = ops(1.0);
        for (kind, m) in [(OperatorKind::V, &o.v), (OperatorKind::W, &o.w), (OperatorKind::Kstar, &o.k_star)] {
            let single = build_operator(&ctx, kind).unwrap();
            assert!(max_abs(&(&single.matrix - m)) < 1e-14);
        }
    }

    #[test]
    fn spectrum_is_inside_the_half_interval_and_contraction_holds() {
        let (ctx, o) = ops(1.0);
        let ev = np_spectrum(&o).unwrap();
        assert!(ev.iter().all(|l| l.abs() < 0.5));
        let c = contraction_constants(&ctx, &o).unwrap();
        assert!(c.c_plus < 1.0 && c.c_minus < 1.0);
        assert!(c.c_plus <= c.bound + 1e-8 && c.c_minus <= c.bound + 1e-8, "{c:?}");
    }

    #[test]
    fn series_inverts_second_kind_operator() {
        let (_, o) = ops(1.0);
        let n = o.dim();
        let f0: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let lhs = DMatrix::identity(n, n) * 0.5 - &o.k_op;
        let phi: Vec<f64> = (&lhs * DVector::from_column_slice(&f0)).iter().copied().collect();
        let r = neumann_series_solve(&o, &TraceVector(phi), SeriesSign::Plus, 1e-10, 2000).unwrap();
        let err = r.solution.iter().zip(&f0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let zero = neumann_series_solve(&o, &TraceVector::zeros(n), SeriesSign::Minus, 1e-10, 5).unwrap();
        assert_eq!(zero.iterations, 1);
    }
}
