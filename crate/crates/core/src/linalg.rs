//! Hermitian positive-definite factorization with a condition estimate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Reciprocal condition numbers below this are treated as singular.
pub const MIN_RCOND: f64 = 1e-12;

const POWER_ITERS: usize = 30;

/// Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
    cond: f64,
}

impl HermitianFactor {
    /// Factor `m`, failing if it is not numerically positive definite or its
    /// estimated condition number exceeds `1 / MIN_RCOND`.
    pub fn new(m: DMatrix<Complex64>, what: &'static str) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Err(Error::Singular { what });
        }
        let lambda_max = power_iteration(n, |v| &m * v);
        let chol = Cholesky::new(m).ok_or(Error::Singular { what })?;
        // A negative pivot appears as an imaginary diagonal entry.
        let pivots_ok = (0..n).all(|i| {
            let d = chol.l_dirty()[(i, i)];
            d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re
        });
        if !pivots_ok {
            return Err(Error::Singular { what });
        }
        let inv_max = power_iteration(n, |v| chol.solve(v));
        let cond = lambda_max * inv_max;
        if !cond.is_finite() || 1.0 / cond < MIN_RCOND {
            return Err(Error::IllConditioned { what, cond });
        }
        Ok(Self { chol, cond })
    }

    /// Estimated 2-norm condition number.
    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        self.chol.solve(b)
    }
}

/// Largest eigenvalue magnitude of a Hermitian operator by power iteration.
fn power_iteration<F>(n: usize, apply: F) -> f64
where
    F: Fn(&DVector<Complex64>) -> DVector<Complex64>,
{
    // Fixed, non-symmetric start vector keeps the estimate deterministic.
    let mut v = DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64 * 0.618_033_988_7).fract(), 0.0)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut est = 0.0;
    for _ in 0..POWER_ITERS {
        let w = apply(&v);
        let norm = w.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return norm;
        }
        est = norm;
        v = w / Complex64::new(norm, 0.0);
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_condition() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(10.0), c(100.0)]));
        let f = HermitianFactor::new(m, "diag").unwrap();
        assert!((f.cond() - 100.0).abs() < 1e-6);
        let x = f.solve_vec(&DVector::from_vec(vec![c(1.0), c(10.0), c(100.0)]));
        for v in x.iter() {
            assert!((v - c(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite_and_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(1.0)]);
        assert!(matches!(
            HermitianFactor::new(m, "m"),
            Err(Error::Singular { .. })
        ));
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        assert!(HermitianFactor::new(m, "m").is_err());
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(1e-14)]));
        assert!(matches!(
            HermitianFactor::new(m, "m"),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn complex_hermitian_solve() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(4.0),
                Complex64::new(1.0, 2.0),
                Complex64::new(1.0, -2.0),
                c(6.0),
            ],
        );
        let f = HermitianFactor::new(m.clone(), "m").unwrap();
        let b = DMatrix::from_row_slice(2, 1, &[Complex64::new(1.0, 1.0), c(-3.0)]);
        let x = f.solve(&b);
        assert!((&m * x - b).norm() < 1e-13);
    }
}
