use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;

use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;

/// Condition estimates above this are treated as singular.
const SINGULAR_COND: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse Cholesky, reused across right-hand sides.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// A factored (or CG-ready) SPD matrix.
pub struct Factorization {
    matrix: SparseSymMatrix,
    llt: Option<faer::sparse::linalg::solvers::Llt<usize, f64>>,
    tol: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("dim", &self.matrix.dim())
            .field("direct", &self.llt.is_some())
            .field("tol", &self.tol)
            .finish()
    }
}

impl Factorization {
    pub fn new(matrix: SparseSymMatrix, kind: SolverKind, tol: f64) -> Result<Self> {
        let n = matrix.dim();
        if matrix.diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite("nonpositive diagonal entry".into()));
        }
        let llt = match kind {
            SolverKind::Cg => None,
            SolverKind::Direct if n == 0 => None,
            SolverKind::Direct => {
                let trip: Vec<Triplet<usize, usize, f64>> = matrix
                    .triplets()
                    .into_iter()
                    .filter(|&(i, j, _)| i >= j)
                    .map(|(i, j, v)| Triplet::new(i, j, v))
                    .collect();
                let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
                    .map_err(|e| Error::NotPositiveDefinite(format!("{e:?}")))?;
                Some(
                    csc.sp_cholesky(faer::Side::Lower)
                        .map_err(|e| Error::NotPositiveDefinite(format!("cholesky failed: {e:?}")))?,
                )
            }
        };
        let f = Factorization { matrix, llt, tol };
        if f.llt.is_some() {
            f.check_conditioning()?;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    /// Solves `A x = b` to the configured relative residual.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: b.len() });
        }
        match &self.llt {
            Some(_) => {
                let m = DMatrix::from_column_slice(b.len(), 1, b);
                Ok(self.solve_columns(&m)?.column(0).iter().copied().collect())
            }
            None => self.cg(b),
        }
    }

    /// Solves for every column of `b`.
    pub fn solve_columns(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (n, k) = b.shape();
        if n != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: n });
        }
        if k == 0 || n == 0 {
            return Ok(DMatrix::zeros(n, k));
        }
        let Some(llt) = &self.llt else {
            let mut x = DMatrix::zeros(n, k);
            for j in 0..k {
                let col: Vec<f64> = b.column(j).iter().copied().collect();
                x.set_column(j, &nalgebra::DVector::from_vec(self.cg(&col)?));
            }
            return Ok(x);
        };
        let mut x = Mat::<f64>::from_fn(n, k, |i, j| b[(i, j)]);
        llt.solve_in_place(x.as_mut());
        let mut out = DMatrix::from_fn(n, k, |i, j| x[(i, j)]);
        // one step of iterative refinement, then an honest residual check
        for j in 0..k {
            let xj: Vec<f64> = out.column(j).iter().copied().collect();
            let r = self.matrix.mul_vec(&xj);
            for i in 0..n {
                x[(i, j)] = b[(i, j)] - r[i];
            }
        }
        llt.solve_in_place(x.as_mut());
        for j in 0..k {
            for i in 0..n {
                out[(i, j)] += x[(i, j)];
            }
            let xj: Vec<f64> = out.column(j).iter().copied().collect();
            let bj: Vec<f64> = b.column(j).iter().copied().collect();
            let (res, bn) = residual(&self.matrix, &xj, &bj);
            if res > self.tol * bn.max(f64::MIN_POSITIVE) && res > 0.0 {
                return Err(Error::NoConvergence { iterations: 1, residual: res / bn, tolerance: self.tol });
            }
        }
        Ok(out)
    }

    fn check_conditioning(&self) -> Result<()> {
        // two steps of inverse iteration estimate the smallest eigenvalue
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut growth = 0.0;
        for _ in 0..3 {
            let nx = norm(&x);
            let mut m = Mat::<f64>::from_fn(n, 1, |i, _| x[i] / nx);
            self.llt.as_ref().unwrap().solve_in_place(m.as_mut());
            x = (0..n).map(|i| m[(i, 0)]).collect();
            growth = norm(&x);
            if !growth.is_finite() {
                break;
            }
        }
        let cond = growth * self.matrix.norm_inf();
        if !cond.is_finite() || cond > SINGULAR_COND {
            return Err(Error::NotPositiveDefinite(format!(
                "matrix is numerically singular (condition estimate {cond:.3e})"
            )));
        }
        Ok(())
    }

    fn cg(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let bn = norm(b);
        let mut x = vec![0.0; n];
        if bn == 0.0 {
            return Ok(x);
        }
        let dinv: Vec<f64> = self.matrix.diagonal().iter().map(|d| 1.0 / d).collect();
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let cap = 20 * n + 100;
        for it in 0..cap {
            let ap = self.matrix.mul_vec(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NotPositiveDefinite(format!("CG breakdown at iteration {it}")));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm(&r) <= self.tol * bn {
                let (res, _) = residual(&self.matrix, &x, b);
                if res <= self.tol * bn {
                    return Ok(x);
                }
            }
            z = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let (res, _) = residual(&self.matrix, &x, b);
        Err(Error::NoConvergence { iterations: cap, residual: res / bn, tolerance: self.tol })
    }
}

/// Solves `A x = b` with a fresh direct factorization.
pub fn solve_spd(a: &SparseSymMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    Factorization::new(a.clone(), SolverKind::Direct, tol)?.solve(b)
}

/// Solves `A x = b` for each `b`, sharing one factorization.
pub fn solve_multi(a: &SparseSymMatrix, bs: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    if bs.is_empty() {
        return Ok(Vec::new());
    }
    let f = Factorization::new(a.clone(), SolverKind::Direct, tol)?;
    let n = a.dim();
    for b in bs {
        if b.len() != n {
            return Err(Error::Dimension { expected: n, got: b.len() });
        }
    }
    let m = DMatrix::from_fn(n, bs.len(), |i, j| bs[j][i]);
    let x = f.solve_columns(&m)?;
    Ok((0..bs.len()).map(|j| x.column(j).iter().copied().collect()).collect())
}

fn residual(a: &SparseSymMatrix, x: &[f64], b: &[f64]) -> (f64, f64) {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    (r, norm(b))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
