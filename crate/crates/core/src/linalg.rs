use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn spd_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(rhs))
}

pub fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

/// `I + snr * H^T H`, the `K x K` matrix behind the decoding MSE.
pub fn gram_regularized(h: &DMatrix<f64>, snr: f64) -> DMatrix<f64> {
    let k = h.ncols();
    DMatrix::identity(k, k) + h.transpose() * h * snr
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn largest_eigenvalue(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Non-uniform start so a symmetric matrix is unlikely to hide its top
    // eigenvector orthogonal to it.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return next.max(norm);
        }
        lambda = next;
    }
    lambda
}
