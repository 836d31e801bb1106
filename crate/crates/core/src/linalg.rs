//! Small dense helpers shared by the trace-space code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}

/// Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what} is not positive definite")))
}

/// Orthonormal basis of the complement of the constant vector.
pub(crate) fn mean_zero_basis(n: usize) -> DMatrix<f64> {
    // Householder reflector mapping e_0 to the normalized ones vector; its
    // remaining columns span 𝟙^⊥.
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    v[0] -= 1.0;
    let vn = v.norm_squared();
    let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vn);
    h.columns(1, n - 1).into_owned()
}

pub(crate) fn subtract_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}
