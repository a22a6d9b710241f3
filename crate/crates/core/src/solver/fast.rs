//! Gram-domain evaluation of the adapted response.
//!
//! Writing `A = 2[a I + b X_s X_s*]` with `a = γ1 + γ2`, `b = γ3`, the
//! matrix-inversion identity gives
//!
//! ```text
//! A⁻¹ = (1 / 2a) [I - b X_s H⁻¹ X_s*],      H = a I + b G_ss
//! ```
//!
//! and every block the closed form needs collapses to Gram blocks and the
//! correlations `r_s = X_s* y`, `r_c = X_c* y`:
//!
//! ```text
//! W   = H⁻¹ G_sc
//! S   = G_cc - b G_cs W
//! ρ̂_s = (γ2 + γ3) H⁻¹ [r_s - G_sc S⁻¹ (r_c - b W* r_s)]
//! ```
//!
//! `H` and `S` are factored once per weight setting; each capture then costs
//! two triangular solve pairs and a few matrix-vector products. At `b = 0`
//! (`γ = 1`) `H = I` and the response is the projection `r_s - G_sc G_cc⁻¹ r_c`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::dense::hermitian_part;
use super::GammaWeights;
use crate::caf::{CafEngine, DDSurface};
use crate::error::{Error, Result};
use crate::gram::GramCache;
use crate::grid::DDGrid;
use crate::linalg::HermitianFactor;
use crate::signal::ComplexSignal;

/// Factored surveillance filter bank, applied through correlations only.
#[derive(Debug, Clone)]
pub struct ImplicitFilter {
    weights: GammaWeights,
    ridge: f64,
    h: HermitianFactor,
    // None when the grid has no clutter cells.
    clutter: Option<ClutterTerms>,
    n_s: usize,
    n_c: usize,
}

#[derive(Debug, Clone)]
struct ClutterTerms {
    w: DMatrix<Complex64>,
    g_sc: DMatrix<Complex64>,
    schur: HermitianFactor,
}

impl ImplicitFilter {
    /// Factor the filter for weights `w`, with an optional ridge `ε` added to
    /// `γ1 + γ2` (zero reproduces the exact problem).
    pub fn build(cache: &GramCache, w: &GammaWeights, ridge: f64) -> Result<Self> {
        w.validate()?;
        if !(ridge >= 0.0) || !ridge.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ridge must be nonnegative, got {ridge}"
            )));
        }
        let a = w.gamma() + ridge;
        if a <= 0.0 {
            return Err(Error::InvalidParameter(
                "γ1 + γ2 = 0 makes the system singular; use gamma > 0 or a ridge".into(),
            ));
        }
        let b = w.gamma3;
        let grid = cache.grid();
        let (n_s, n_c) = (grid.n_surveillance(), grid.n_clutter());

        let mut h = cache.ss() * Complex64::new(b, 0.0);
        for i in 0..n_s {
            h[(i, i)] += Complex64::new(a, 0.0);
        }
        let h = HermitianFactor::new(hermitian_part(h), "a I + b G_ss")?;

        let clutter = if n_c == 0 {
            None
        } else {
            let g_sc = cache.sc().clone();
            let w_mat = h.solve(&g_sc);
            let schur = cache.cc() - g_sc.ad_mul(&w_mat) * Complex64::new(b, 0.0);
            let schur = HermitianFactor::new(hermitian_part(schur), "G_cc - b G_cs H⁻¹ G_sc")?;
            Some(ClutterTerms {
                w: w_mat,
                g_sc,
                schur,
            })
        };
        Ok(Self {
            weights: *w,
            ridge,
            h,
            clutter,
            n_s,
            n_c,
        })
    }

    /// Reduced-parameter filter `(0, γ, 1 - γ)`; `γ` must lie in `(0, 1]`.
    pub fn reduced(cache: &GramCache, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        Self::build(cache, &GammaWeights::reduced(gamma)?, 0.0)
    }

    pub fn weights(&self) -> &GammaWeights {
        &self.weights
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Condition estimates of the two factored systems.
    pub fn condition(&self) -> (f64, Option<f64>) {
        (self.h.cond(), self.clutter.as_ref().map(|c| c.schur.cond()))
    }

    /// `ρ̂_s` from the correlations `(r_s, r_c)`.
    pub fn apply(&self, r_s: &[Complex64], r_c: &[Complex64]) -> Result<Vec<Complex64>> {
        if r_s.len() != self.n_s {
            return Err(Error::LengthMismatch {
                expected: self.n_s,
                actual: r_s.len(),
            });
        }
        if r_c.len() != self.n_c {
            return Err(Error::LengthMismatch {
                expected: self.n_c,
                actual: r_c.len(),
            });
        }
        let rs = DVector::from_column_slice(r_s);
        let inner = match &self.clutter {
            None => rs,
            Some(ct) => {
                let b = Complex64::new(self.weights.gamma3, 0.0);
                let rc = DVector::from_column_slice(r_c);
                let resid = rc - ct.w.ad_mul(&rs) * b;
                let coef = ct.schur.solve_vec(&resid);
                rs - &ct.g_sc * coef
            }
        };
        let out = self.h.solve_vec(&inner) * Complex64::new(self.weights.scale(), 0.0);
        Ok(out.iter().copied().collect())
    }

    /// Adapted surface for capture `y`, correlated through `engine`.
    pub fn surface(&self, engine: &CafEngine, y: &ComplexSignal) -> Result<DDSurface> {
        let (r_s, r_c) = engine.cross_correlations(y)?;
        DDSurface::from_surveillance(engine.grid(), &self.apply(&r_s, &r_c)?)
    }
}

/// One-shot adapted response for the reduced problem at `gamma`.
pub fn adapted_response_fast(
    x: &ComplexSignal,
    y: &ComplexSignal,
    grid: &DDGrid,
    gamma: f64,
) -> Result<DDSurface> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let cache = GramCache::new(x, grid)?;
    let filter = ImplicitFilter::reduced(&cache, gamma)?;
    filter.surface(&CafEngine::new(x, grid)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caf::classical_caf;
    use crate::grid::{build_default_grid, materialize_columns, Subset};
    use crate::solver::dense::solve_dense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(len: usize, seed: u64) -> ComplexSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..len)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        ComplexSignal::new(s, 1000.0).unwrap()
    }

    fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let n: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum();
        let d: f64 = b.iter().map(|q| q.norm_sqr()).sum();
        (n / d).sqrt()
    }

    #[test]
    fn matches_dense_oracle() {
        let x = random_signal(128, 1);
        let y = random_signal(128, 2);
        let g = build_default_grid(1000.0, 0.004, 0.0, 100.0, 50.0).unwrap();
        let cache = GramCache::new(&x, &g).unwrap();
        let engine = CafEngine::new(&x, &g).unwrap();
        for gamma in [0.05, 0.5, 0.98, 1.0] {
            let fast = ImplicitFilter::reduced(&cache, gamma)
                .unwrap()
                .surface(&engine, &y)
                .unwrap();
            let dense = solve_dense(&x, &g, &GammaWeights::reduced(gamma).unwrap()).unwrap();
            let want = dense.respond(&y).unwrap();
            assert!(
                rel(&fast.surveillance_values(&g), &want) < 1e-8,
                "gamma {gamma}"
            );
        }
    }

    #[test]
    fn general_weights_match_dense() {
        let x = random_signal(64, 3);
        let y = random_signal(64, 4);
        let g = DDGrid::from_rows(vec![0, 1, 2], vec![-40.0, 0.0, 40.0], &[1]).unwrap();
        let cache = GramCache::new(&x, &g).unwrap();
        let (r_s, r_c) = CafEngine::new(&x, &g)
            .unwrap()
            .cross_correlations(&y)
            .unwrap();
        let w = GammaWeights::new(0.25, 0.25, 0.5).unwrap();
        let fast = ImplicitFilter::build(&cache, &w, 0.0)
            .unwrap()
            .apply(&r_s, &r_c)
            .unwrap();
        let dense = solve_dense(&x, &g, &w).unwrap().respond(&y).unwrap();
        assert!(rel(&fast, &dense) < 1e-8);
    }

    #[test]
    fn pure_clutter_capture_is_nulled() {
        let x = random_signal(256, 5);
        let g = build_default_grid(1000.0, 0.007, 0.0, 100.0, 25.0).unwrap();
        let xc = materialize_columns(&x, &g, Subset::Clutter).unwrap();
        let rho_c = DVector::from_fn(xc.ncols(), |i, _| {
            Complex64::new(1.0 + i as f64, -0.5 * i as f64)
        });
        let y = ComplexSignal::new((&xc * &rho_c).iter().copied().collect(), 1000.0).unwrap();
        for gamma in [0.5, 0.98, 1.0] {
            let s = adapted_response_fast(&x, &y, &g, gamma).unwrap();
            assert!(
                s.frobenius() / rho_c.norm() <= 1e-8,
                "gamma {gamma}: {}",
                s.frobenius() / rho_c.norm()
            );
        }
    }

    #[test]
    fn nests_classical_without_clutter() {
        let x = random_signal(200, 6);
        let y = random_signal(200, 7);
        let g = DDGrid::from_rows(vec![0, 1, 2, 3], vec![-30.0, 0.0, 30.0], &[]).unwrap();
        let adapted = adapted_response_fast(&x, &y, &g, 1.0).unwrap();
        let classical = classical_caf(&x, &y, &g).unwrap();
        assert_eq!(adapted.values(), classical.values());
    }

    #[test]
    fn rejects_bad_gamma_and_lengths() {
        let x = random_signal(64, 8);
        let g = DDGrid::from_rows(vec![0, 1], vec![0.0, 40.0], &[0]).unwrap();
        let cache = GramCache::new(&x, &g).unwrap();
        assert!(ImplicitFilter::reduced(&cache, 0.0).is_err());
        assert!(ImplicitFilter::reduced(&cache, 1.5).is_err());
        let f = ImplicitFilter::reduced(&cache, 0.9).unwrap();
        assert!(f.apply(&[Complex64::new(0.0, 0.0)], &[]).is_err());
        // γ = 0 is reachable only through the ridge.
        let w0 = GammaWeights::reduced(0.0).unwrap();
        assert!(ImplicitFilter::build(&cache, &w0, 0.0).is_err());
        assert!(ImplicitFilter::build(&cache, &w0, 1e-3).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn response_is_linear(seed in 0u64..500, a in -3.0..3.0f64, b in -3.0..3.0f64, gamma in 0.05..1.0f64) {
                let x = random_signal(96, seed);
                let g = DDGrid::from_rows(vec![0, 1, 3], vec![-50.0, 0.0, 50.0], &[1]).unwrap();
                let cache = GramCache::new(&x, &g).unwrap();
                let engine = CafEngine::new(&x, &g).unwrap();
                let f = ImplicitFilter::reduced(&cache, gamma).unwrap();
                let y1 = random_signal(96, seed + 1000);
                let y2 = random_signal(96, seed + 2000);
                let mut y = y1.clone();
                y.samples_mut().iter_mut().for_each(|v| *v *= a);
                y.add_scaled(&y2, Complex64::new(b, 0.0)).unwrap();
                let s = f.surface(&engine, &y).unwrap();
                let s1 = f.surface(&engine, &y1).unwrap();
                let s2 = f.surface(&engine, &y2).unwrap();
                let rhs: Vec<_> = s1.values().iter().zip(s2.values()).map(|(p, q)| p * a + q * b).collect();
                let scale = s1.frobenius() + s2.frobenius() + 1.0;
                let err: f64 = s.values().iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
                prop_assert!(err <= 1e-10 * scale * 4.0);
            }
        }
    }
}
