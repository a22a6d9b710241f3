//! Explicit `T x T` evaluation of the closed-form KKT solution.
//!
//! With `A = 2[(γ1 + γ2) I + γ3 X_s X_s*]` and `M = X_c* A⁻¹ X_c`:
//!
//! ```text
//! U_s = 2 (γ2 + γ3) A⁻¹ (I - X_c M⁻¹ X_c* A⁻¹) X_s
//! ```
//!
//! Only meant for small `T`; the cap guards against accidental use at full
//! scale.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::GammaWeights;
use crate::error::{Error, Result};
use crate::grid::{materialize_columns, DDGrid, Subset};
use crate::linalg::HermitianFactor;
use crate::signal::ComplexSignal;

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Explicit `T x N_s` surveillance filter bank.
#[derive(Debug, Clone)]
pub struct ExplicitFilter {
    pub u_s: DMatrix<Complex64>,
    pub weights: GammaWeights,
}

impl ExplicitFilter {
    /// `ρ̂_s = U_s* y`.
    pub fn respond(&self, y: &ComplexSignal) -> Result<Vec<Complex64>> {
        if y.len() != self.u_s.nrows() {
            return Err(Error::LengthMismatch {
                expected: self.u_s.nrows(),
                actual: y.len(),
            });
        }
        let yv = nalgebra::DVector::from_column_slice(y.samples());
        Ok(self.u_s.ad_mul(&yv).iter().copied().collect())
    }
}

fn system_matrix(xs: &DMatrix<Complex64>, w: &GammaWeights) -> DMatrix<Complex64> {
    let t = xs.nrows();
    let mut a = xs * xs.adjoint() * Complex64::new(2.0 * w.gamma3, 0.0);
    for i in 0..t {
        a[(i, i)] += Complex64::new(2.0 * w.gamma(), 0.0);
    }
    a
}

pub fn solve_dense(x: &ComplexSignal, grid: &DDGrid, w: &GammaWeights) -> Result<ExplicitFilter> {
    solve_dense_capped(x, grid, w, DEFAULT_DENSE_CAP)
}

pub fn solve_dense_capped(
    x: &ComplexSignal,
    grid: &DDGrid,
    w: &GammaWeights,
    cap: usize,
) -> Result<ExplicitFilter> {
    w.validate()?;
    let t = x.len();
    if t > cap {
        return Err(Error::TooLarge { rows: t, cap });
    }
    if w.gamma() == 0.0 && t > grid.n_surveillance() {
        return Err(Error::Singular {
            what: "A (γ1 + γ2 = 0 with T > N_s)",
        });
    }
    let xs = materialize_columns(x, grid, Subset::Surveillance)?;
    let xc = materialize_columns(x, grid, Subset::Clutter)?;
    let a = HermitianFactor::new(system_matrix(&xs, w), "A")?;

    let ainv_xs = a.solve(&xs);
    let two_s = Complex64::new(2.0 * w.scale(), 0.0);
    let u_s = if xc.ncols() == 0 {
        ainv_xs * two_s
    } else {
        let ainv_xc = a.solve(&xc);
        let m = HermitianFactor::new(hermitian_part(xc.ad_mul(&ainv_xc)), "X_c* A⁻¹ X_c")?;
        // A⁻¹ X_c M⁻¹ X_c* A⁻¹ X_s, with X_c* A⁻¹ X_s = (A⁻¹ X_c)* X_s.
        let coupling = m.solve(&ainv_xc.ad_mul(&xs));
        (ainv_xs - ainv_xc * coupling) * two_s
    };
    Ok(ExplicitFilter { u_s, weights: *w })
}

pub(crate) fn hermitian_part(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Relative residuals of the optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `||X_c* U_s||_F / ||X_s||_F`
    pub constraint: f64,
    /// `||A U_s + X_c Λ - 2(γ2 + γ3) X_s||_F / ||X_s||_F`, `Λ` by least squares.
    pub stationarity: f64,
}

pub fn kkt_residuals(
    x: &ComplexSignal,
    grid: &DDGrid,
    filter: &ExplicitFilter,
) -> Result<KktResiduals> {
    let w = &filter.weights;
    let xs = materialize_columns(x, grid, Subset::Surveillance)?;
    let xc = materialize_columns(x, grid, Subset::Clutter)?;
    let xs_norm = xs.norm();
    let u = &filter.u_s;

    let constraint = if xc.ncols() == 0 {
        0.0
    } else {
        xc.ad_mul(u).norm() / xs_norm
    };

    let a = system_matrix(&xs, w);
    let target = &xs * Complex64::new(2.0 * w.scale(), 0.0) - &a * u;
    let residual = if xc.ncols() == 0 {
        target
    } else {
        let gram = HermitianFactor::new(xc.ad_mul(&xc), "X_c* X_c")?;
        let lambda = gram.solve(&xc.ad_mul(&target));
        target - &xc * lambda
    };
    Ok(KktResiduals {
        constraint,
        stationarity: residual.norm() / xs_norm,
    })
}

/// Objective value of the weighted problem at `u`.
pub fn objective(xs: &DMatrix<Complex64>, w: &GammaWeights, u: &DMatrix<Complex64>) -> f64 {
    let ident = DMatrix::<Complex64>::identity(xs.ncols(), xs.ncols());
    w.gamma1 * u.norm_squared()
        + w.gamma2 * (u - xs).norm_squared()
        + w.gamma3 * (xs.ad_mul(u) - ident).norm_squared()
}
