//! Adaptive filter synthesis.
//!
//! The surveillance filter bank `U_s` minimizes
//!
//! ```text
//! γ1 ||U_s||² + γ2 ||U_s - X_s||² + γ3 ||X_s* U_s - I||²   subject to   X_c* U_s = 0
//! ```
//!
//! and the adapted response is `ρ̂_s = U_s* y`. Two routes compute it:
//! [`dense`] forms the `T x T` KKT solution explicitly and serves as the
//! oracle; [`fast`] works only with `N`-dimensional Gram blocks and is the
//! path used for real workloads.

pub mod dense;
pub mod fast;
mod scaling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dense::{
    kkt_residuals, objective, solve_dense, ExplicitFilter, KktResiduals, DEFAULT_DENSE_CAP,
};
pub use fast::{adapted_response_fast, ImplicitFilter};
pub use scaling::{weight_split_factorization, ScalingReport};

/// Objective weights `(γ1, γ2, γ3)`, summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl GammaWeights {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        let w = Self {
            gamma1,
            gamma2,
            gamma3,
        };
        w.validate()?;
        Ok(w)
    }

    /// The reduced one-parameter family: `(0, γ, 1 - γ)`.
    pub fn reduced(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        Self::new(0.0, gamma, 1.0 - gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let g = [self.gamma1, self.gamma2, self.gamma3];
        if g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights must be nonnegative, got {g:?}"
            )));
        }
        if (g.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to one, got {g:?}"
            )));
        }
        Ok(())
    }

    /// `γ = γ1 + γ2`, the only combination the normalized filter depends on.
    pub fn gamma(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    /// Factor `γ2 + γ3` multiplying the normalized solution.
    pub fn scale(&self) -> f64 {
        self.gamma2 + self.gamma3
    }
}
