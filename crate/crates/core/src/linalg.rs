//! Dense helpers for small symmetric positive-definite systems.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Jitter levels tried (as fractions of the mean diagonal) before a
/// non-factorisable matrix is declared a numerical failure. ARD drives
/// precisions towards ~1e15, so the K×K systems can be very ill-conditioned.
const JITTER_STEPS: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Cholesky factor of a symmetric positive-definite matrix, with escalating
/// diagonal jitter on failure.
pub fn spd_cholesky<T: Real>(a: &DMatrix<T>, context: &str) -> Result<Cholesky<T, Dyn>> {
    debug_assert_eq!(a.nrows(), a.ncols());
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol);
    }
    let mean_diag = a.diagonal().sum() / T::of(a.nrows() as f64);
    for &step in &JITTER_STEPS {
        let mut jittered = a.clone();
        let jitter = mean_diag.abs() * T::of(step);
        for i in 0..a.nrows() {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol);
        }
    }
    Err(Error::Numerical(format!(
        "matrix not positive definite after jitter escalation ({context})"
    )))
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
/// The returned inverse is exactly symmetric.
pub fn spd_inverse_logdet<T: Real>(a: &DMatrix<T>, context: &str) -> Result<(DMatrix<T>, T)> {
    let chol = spd_cholesky(a, context)?;
    let mut ln_det = T::zero();
    for i in 0..a.nrows() {
        ln_det += chol.l_dirty()[(i, i)].ln();
    }
    ln_det *= T::of(2.0);
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok((inv, ln_det))
}

/// Log-determinant alone.
pub fn spd_logdet<T: Real>(a: &DMatrix<T>, context: &str) -> Result<T> {
    let chol = spd_cholesky(a, context)?;
    let mut ln_det = T::zero();
    for i in 0..a.nrows() {
        ln_det += chol.l_dirty()[(i, i)].ln();
    }
    Ok(ln_det * T::of(2.0))
}

/// Mirrors the lower triangle onto the upper one.
pub fn symmetrize<T: Real>(a: &mut DMatrix<T>) {
    for j in 0..a.ncols() {
        for i in (j + 1)..a.nrows() {
            a[(j, i)] = a[(i, j)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_and_logdet_of_spd_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (inv, ln_det) = spd_inverse_logdet(&a, "test").unwrap();
        let prod = &a * &inv;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)], expect, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(ln_det, a.determinant().ln(), epsilon = 1e-12);
        assert_eq!(inv[(0, 1)], inv[(1, 0)]);
    }

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        // Rank-one matrix: plain Cholesky fails, jitter makes it factorisable.
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        assert!(Cholesky::new(a.clone()).is_none());
        assert!(spd_cholesky(&a, "rank one").is_ok());
    }

    #[test]
    fn indefinite_matrix_is_numerical_failure() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5.0]);
        assert!(spd_inverse_logdet(&a, "indefinite").is_err());
    }
}
