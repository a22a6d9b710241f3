//! Two-dimensional cell-averaging CFAR.
//!
//! The training region of a cell under test is the rectangle extending
//! `guard + train/2` cells to each side, minus the guard rectangle. Near the
//! surface edges the window is clipped and the threshold factor recomputed for
//! the number of training cells that remain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfarConfig {
    pub guard_delay: usize,
    pub guard_doppler: usize,
    /// Total training extent along delay, split evenly to both sides.
    pub train_delay: usize,
    /// Total training extent along Doppler, split evenly to both sides.
    pub train_doppler: usize,
    pub pfa_tuned: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            guard_delay: 1,
            guard_doppler: 1,
            train_delay: 12,
            train_doppler: 6,
            pfa_tuned: 1e-2,
        }
    }
}

impl CfarConfig {
    fn per_side(train: usize) -> usize {
        (train / 2).max(1)
    }

    /// Half-widths `(rows, cols)` of the full CFAR window.
    pub fn reach(&self) -> (usize, usize) {
        (
            self.guard_doppler + Self::per_side(self.train_doppler),
            self.guard_delay + Self::per_side(self.train_delay),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_delay == 0 || self.train_doppler == 0 {
            return Err(Error::InvalidParameter(
                "training extents must be positive".into(),
            ));
        }
        if !(self.pfa_tuned > 0.0 && self.pfa_tuned < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pfa must lie in (0, 1), got {}",
                self.pfa_tuned
            )));
        }
        Ok(())
    }
}

/// Threshold multiplier for `n_train` exponentially distributed training
/// cells: `α = n (pfa^(-1/n) - 1)`.
pub fn cfar_threshold_factor(pfa: f64, n_train: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pfa must lie in (0, 1), got {pfa}"
        )));
    }
    if n_train == 0 {
        return Err(Error::InvalidParameter("n_train must be positive".into()));
    }
    let n = n_train as f64;
    // exp_m1 keeps precision as pfa -> 1.
    Ok(n * (-pfa.ln() / n).exp_m1())
}

/// Boolean detection surface, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RleMask", try_from = "RleMask")]
pub struct DetectionMask {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

/// Run-length JSON form: `[start, length]` runs of set cells in row-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RleMask {
    rows: usize,
    cols: usize,
    runs: Vec<(usize, usize)>,
}

impl From<DetectionMask> for RleMask {
    fn from(m: DetectionMask) -> Self {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < m.cells.len() {
            if m.cells[i] {
                let start = i;
                while i < m.cells.len() && m.cells[i] {
                    i += 1;
                }
                runs.push((start, i - start));
            } else {
                i += 1;
            }
        }
        RleMask {
            rows: m.rows,
            cols: m.cols,
            runs,
        }
    }
}

impl TryFrom<RleMask> for DetectionMask {
    type Error = Error;

    fn try_from(r: RleMask) -> Result<Self> {
        let mut cells = vec![false; r.rows * r.cols];
        for (start, len) in r.runs {
            let end = start.checked_add(len).filter(|&e| e <= cells.len());
            let end = end.ok_or_else(|| Error::Format("mask run out of bounds".into()))?;
            cells[start..end].iter_mut().for_each(|c| *c = true);
        }
        Ok(Self {
            rows: r.rows,
            cols: r.cols,
            cells,
        })
    }
}

impl DetectionMask {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: cells.len(),
            });
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.cells[row * self.cols + col] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// `(row, col)` of every set cell, row-major.
    pub fn detections(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i / self.cols, i % self.cols))
    }
}

pub fn ca_cfar(power: &[f64], rows: usize, cols: usize, cfg: &CfarConfig) -> Result<DetectionMask> {
    ca_cfar_with(power, rows, cols, cfg, Exec::default())
}

pub fn ca_cfar_with(
    power: &[f64],
    rows: usize,
    cols: usize,
    cfg: &CfarConfig,
    exec: Exec,
) -> Result<DetectionMask> {
    cfg.validate()?;
    if power.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            actual: power.len(),
        });
    }
    let (gr, gc) = (cfg.guard_doppler, cfg.guard_delay);
    let (rr, rc) = cfg.reach();
    if rows <= rr || cols <= rc {
        return Err(Error::SurfaceTooSmall { rows, cols });
    }
    let max_train = (2 * rr + 1) * (2 * rc + 1);
    let alphas = (0..=max_train)
        .map(|n| {
            if n == 0 {
                Ok(0.0)
            } else {
                cfar_threshold_factor(cfg.pfa_tuned, n)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let row_masks: Vec<Result<Vec<bool>>> = exec.map(rows, |r| {
        let r0 = r.saturating_sub(rr);
        let r1 = (r + rr).min(rows - 1);
        (0..cols)
            .map(|c| {
                let c0 = c.saturating_sub(rc);
                let c1 = (c + rc).min(cols - 1);
                let mut sum = 0.0;
                let mut n = 0usize;
                for i in r0..=r1 {
                    let guard_row = i.abs_diff(r) <= gr;
                    for j in c0..=c1 {
                        if guard_row && j.abs_diff(c) <= gc {
                            continue;
                        }
                        sum += power[i * cols + j];
                        n += 1;
                    }
                }
                if n == 0 {
                    return Err(Error::SurfaceTooSmall { rows, cols });
                }
                let cut = power[r * cols + c];
                Ok(if sum == 0.0 {
                    cut > 0.0
                } else {
                    cut > alphas[n] * sum / n as f64
                })
            })
            .collect()
    });
    let mut cells = Vec::with_capacity(rows * cols);
    for row in row_masks {
        cells.extend(row?);
    }
    Ok(DetectionMask { rows, cols, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn threshold_factor_values() {
        assert!((cfar_threshold_factor(0.5, 1).unwrap() - 1.0).abs() < 1e-15);
        // 36 (100^(1/36) - 1), evaluated independently.
        let want = 36.0 * (100f64.powf(1.0 / 36.0) - 1.0);
        let got = cfar_threshold_factor(1e-2, 36).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 4.912_691_989_886).abs() < 1e-9);
        assert!(cfar_threshold_factor(1.0 - 1e-12, 10).unwrap() < 1e-10);
        assert!(cfar_threshold_factor(0.0, 10).is_err());
        assert!(cfar_threshold_factor(1.0, 10).is_err());
    }

    #[test]
    fn constant_surface_has_no_detections() {
        let m = ca_cfar(&vec![3.0; 20 * 30], 20, 30, &CfarConfig::default()).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn lone_spike_in_zero_background() {
        let (rows, cols) = (12, 20);
        let mut p = vec![0.0; rows * cols];
        p[5 * cols + 9] = 1.0;
        let m = ca_cfar(&p, rows, cols, &CfarConfig::default()).unwrap();
        assert_eq!(m.detections().collect::<Vec<_>>(), vec![(5, 9)]);
    }

    #[test]
    fn too_small_surface() {
        let cfg = CfarConfig::default();
        assert!(matches!(
            ca_cfar(&[1.0; 16], 4, 4, &cfg),
            Err(Error::SurfaceTooSmall { .. })
        ));
        assert!(ca_cfar(&[1.0; 3], 2, 2, &cfg).is_err());
    }

    #[test]
    fn exponential_noise_false_rate() {
        let (rows, cols) = (300, 400);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let p: Vec<f64> = (0..rows * cols).map(|_| Exp1.sample(&mut rng)).collect();
        let m = ca_cfar(&p, rows, cols, &CfarConfig::default()).unwrap();
        let rate = m.count() as f64 / (rows * cols) as f64;
        assert!((0.5e-2..=2e-2).contains(&rate), "rate {rate}");
    }

    #[test]
    fn sequential_matches_parallel() {
        let (rows, cols) = (40, 50);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..rows * cols).map(|_| Exp1.sample(&mut rng)).collect();
        let cfg = CfarConfig {
            pfa_tuned: 0.1,
            ..Default::default()
        };
        let a = ca_cfar_with(&p, rows, cols, &cfg, Exec::Parallel).unwrap();
        let b = ca_cfar_with(&p, rows, cols, &cfg, Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rle_json_round_trip() {
        let mut m = DetectionMask::empty(3, 4);
        m.set(0, 1, true);
        m.set(0, 2, true);
        m.set(2, 3, true);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":3,"cols":4,"runs":[[1,2],[11,1]]}"#);
        let back: DetectionMask = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(
            serde_json::from_str::<DetectionMask>(r#"{"rows":1,"cols":2,"runs":[[1,5]]}"#).is_err()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn surface() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0..10.0f64, 16 * 20)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn scale_invariant(p in surface(), k in -20i32..20) {
                let c = 2f64.powi(k);
                let cfg = CfarConfig { pfa_tuned: 0.05, ..Default::default() };
                let a = ca_cfar(&p, 16, 20, &cfg).unwrap();
                let scaled: Vec<f64> = p.iter().map(|v| v * c).collect();
                prop_assert_eq!(a, ca_cfar(&scaled, 16, 20, &cfg).unwrap());
            }

            #[test]
            fn lower_pfa_never_adds(p in surface(), hi in 1e-4..0.5f64, shrink in 1e-3..1.0f64) {
                let loose = CfarConfig { pfa_tuned: hi, ..Default::default() };
                let tight = CfarConfig { pfa_tuned: hi * shrink, ..Default::default() };
                let a = ca_cfar(&p, 16, 20, &loose).unwrap();
                let b = ca_cfar(&p, 16, 20, &tight).unwrap();
                for (r, c) in b.detections() {
                    prop_assert!(a.get(r, c));
                }
            }
        }
    }
}
