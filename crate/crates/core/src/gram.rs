//! Inner products between replica columns (blocks of `X* X`).
//!
//! For two Doppler rows `p, q` the entry between delays `di, dj` is
//!
//! ```text
//! G = sum_{n >= max(di, dj)} conj(x[n - di]) x[n - dj] e^{i 2π (f_q - f_p) n / fs}
//! ```
//!
//! The fast path evaluates the untruncated lag correlation for every lag with
//! one FFT per Doppler difference, then removes the few samples that the
//! linear (non-wrapping) delay pushes out of the window using suffix sums.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::grid::{materialize_columns, Cell, DDGrid, Subset};
use crate::par::Exec;
use crate::signal::{doppler_phasor, ComplexSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<Complex64>,
    pub rows: Subset,
    pub cols: Subset,
}

impl GramMatrix {
    /// `||G - G*||_F / ||G||_F`; only meaningful for square blocks.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.values;
        let d = g - g.adjoint();
        let n = g.norm();
        if n == 0.0 {
            0.0
        } else {
            d.norm() / n
        }
    }
}

/// Direct evaluation `X_a* X_b` from materialized columns.
pub fn gram_direct(x: &ComplexSignal, grid: &DDGrid, a: Subset, b: Subset) -> Result<GramMatrix> {
    let xa = materialize_columns(x, grid, a)?;
    let xb = materialize_columns(x, grid, b)?;
    Ok(GramMatrix {
        values: xa.ad_mul(&xb),
        rows: a,
        cols: b,
    })
}

/// FFT-accelerated `X_a* X_b`.
pub fn gram(x: &ComplexSignal, grid: &DDGrid, a: Subset, b: Subset) -> Result<GramMatrix> {
    gram_with(x, grid, a, b, Exec::default())
}

pub fn gram_with(
    x: &ComplexSignal,
    grid: &DDGrid,
    a: Subset,
    b: Subset,
    exec: Exec,
) -> Result<GramMatrix> {
    grid.check_fits(x.len())?;
    let ctx = LagContext::new(x, grid.max_delay());
    let values = ctx.block(grid, &grid.cells(a), &grid.cells(b), a == b, exec);
    Ok(GramMatrix {
        values,
        rows: a,
        cols: b,
    })
}

/// Group cells by Doppler index, keeping their positions in the cell list.
fn by_row(cells: &[Cell]) -> Vec<(usize, Vec<(usize, usize)>)> {
    let mut rows: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for (pos, c) in cells.iter().enumerate() {
        match rows.iter_mut().find(|(r, _)| *r == c.doppler) {
            Some((_, v)) => v.push((pos, c.delay)),
            None => rows.push((c.doppler, vec![(pos, c.delay)])),
        }
    }
    rows
}

struct LagContext<'a> {
    x: &'a [Complex64],
    fs: f64,
    max_lag: usize,
    fft_len: usize,
    ref_conj: Vec<Complex64>,
}

/// Lag correlations and tail suffix sums for one Doppler difference.
struct PairTables {
    // corr[k + max_lag] = sum_m conj(x[m + k]) x[m] e^{iΔω m}, over all valid m
    corr: Vec<Complex64>,
    // tails[(k + max_lag) * (max_lag + 1) + c]: sum of the last `c` terms of corr(k)
    tails: Vec<Complex64>,
}

impl<'a> LagContext<'a> {
    fn new(x: &'a ComplexSignal, max_lag: usize) -> Self {
        let t = x.len();
        let fft_len = (t + max_lag).next_power_of_two();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
        spectrum[..t].copy_from_slice(x.samples());
        FftPlanner::<f64>::new()
            .plan_fft_forward(fft_len)
            .process(&mut spectrum);
        let scale = 1.0 / fft_len as f64;
        spectrum.iter_mut().for_each(|v| *v = v.conj() * scale);
        Self {
            x: x.samples(),
            fs: x.sample_rate_hz(),
            max_lag,
            fft_len,
            ref_conj: spectrum,
        }
    }

    fn tables(&self, df: f64) -> PairTables {
        let t = self.x.len();
        let kmax = self.max_lag as isize;
        let mut planner = FftPlanner::<f64>::new();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (n, v) in self.x.iter().enumerate() {
            buf[n] = if df == 0.0 {
                *v
            } else {
                v * doppler_phasor(df, self.fs, n)
            };
        }
        planner.plan_fft_forward(self.fft_len).process(&mut buf);
        buf.iter_mut()
            .zip(&self.ref_conj)
            .for_each(|(b, r)| *b *= r);
        planner.plan_fft_inverse(self.fft_len).process(&mut buf);
        // buf[j] = sum_m conj(x[m]) v[m + j]; lag k reads j = -k.
        let corr: Vec<Complex64> = (-kmax..=kmax)
            .map(|k| buf[(-k).rem_euclid(self.fft_len as isize) as usize])
            .collect();

        let width = self.max_lag + 1;
        let mut tails = vec![Complex64::new(0.0, 0.0); corr.len() * width];
        for (ki, k) in (-kmax..=kmax).enumerate() {
            let top = t as isize - 1 - k.max(0);
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 1..width {
                let m = top - (c as isize - 1);
                let mk = m + k;
                if m < 0 || mk < 0 || mk >= t as isize {
                    tails[ki * width + c] = acc;
                    continue;
                }
                let (m, mk) = (m as usize, mk as usize);
                let v = if df == 0.0 {
                    self.x[m]
                } else {
                    self.x[m] * doppler_phasor(df, self.fs, m)
                };
                acc += self.x[mk].conj() * v;
                tails[ki * width + c] = acc;
            }
        }
        PairTables { corr, tails }
    }

    fn entry(&self, tables: &PairTables, df: f64, di: usize, dj: usize) -> Complex64 {
        let k = dj as isize - di as isize;
        let ki = (k + self.max_lag as isize) as usize;
        let count = dj as isize - k.max(0);
        let tail = if count > 0 {
            tables.tails[ki * (self.max_lag + 1) + count as usize]
        } else {
            Complex64::new(0.0, 0.0)
        };
        let phase = if df == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            doppler_phasor(df, self.fs, dj)
        };
        phase * (tables.corr[ki] - tail)
    }

    fn block(
        &self,
        grid: &DDGrid,
        a: &[Cell],
        b: &[Cell],
        hermitian: bool,
        exec: Exec,
    ) -> DMatrix<Complex64> {
        let rows_a = by_row(a);
        let rows_b = by_row(b);
        let dopplers = grid.doppler_bins_hz();
        let delays = grid.delay_bins();

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (ia, (p, _)) in rows_a.iter().enumerate() {
            for (ib, (q, _)) in rows_b.iter().enumerate() {
                if !hermitian || p <= q {
                    pairs.push((ia, ib));
                }
            }
        }

        // One correlation table per distinct Doppler difference.
        let mut diffs: Vec<f64> = Vec::new();
        let mut diff_of_pair = Vec::with_capacity(pairs.len());
        let mut seen: HashMap<u64, usize> = HashMap::new();
        for &(ia, ib) in &pairs {
            let df = dopplers[rows_b[ib].0] - dopplers[rows_a[ia].0];
            let idx = *seen.entry(df.to_bits()).or_insert_with(|| {
                diffs.push(df);
                diffs.len() - 1
            });
            diff_of_pair.push(idx);
        }
        let tables = exec.map(diffs.len(), |i| self.tables(diffs[i]));

        let blocks = exec.map(pairs.len(), |pi| {
            let (ia, ib) = pairs[pi];
            let df = diffs[diff_of_pair[pi]];
            let tab = &tables[diff_of_pair[pi]];
            let mut out = Vec::with_capacity(rows_a[ia].1.len() * rows_b[ib].1.len());
            for &(ra, da) in &rows_a[ia].1 {
                for &(rb, db) in &rows_b[ib].1 {
                    out.push((ra, rb, self.entry(tab, df, delays[da], delays[db])));
                }
            }
            out
        });

        let mut g = DMatrix::from_element(a.len(), b.len(), Complex64::new(0.0, 0.0));
        for block in blocks {
            for (r, c, v) in block {
                g[(r, c)] = v;
                if hermitian {
                    g[(c, r)] = v.conj();
                }
            }
        }
        if hermitian {
            for i in 0..a.len() {
                g[(i, i)] = Complex64::new(g[(i, i)].re, 0.0);
            }
        }
        g
    }
}

/// Lazily built Gram blocks for one `(x, grid)` pair.
///
/// Each block is computed at most once; after that, concurrent readers share
/// it without locking.
#[derive(Debug)]
pub struct GramCache {
    x: ComplexSignal,
    grid: DDGrid,
    exec: Exec,
    ss: OnceLock<DMatrix<Complex64>>,
    sc: OnceLock<DMatrix<Complex64>>,
    cc: OnceLock<DMatrix<Complex64>>,
}

impl GramCache {
    pub fn new(x: &ComplexSignal, grid: &DDGrid) -> Result<Self> {
        Self::with_exec(x, grid, Exec::default())
    }

    pub fn with_exec(x: &ComplexSignal, grid: &DDGrid, exec: Exec) -> Result<Self> {
        grid.check_fits(x.len())?;
        Ok(Self {
            x: x.clone(),
            grid: grid.clone(),
            exec,
            ss: OnceLock::new(),
            sc: OnceLock::new(),
            cc: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &DDGrid {
        &self.grid
    }

    pub fn signal(&self) -> &ComplexSignal {
        &self.x
    }

    fn compute(&self, a: Subset, b: Subset) -> DMatrix<Complex64> {
        gram_with(&self.x, &self.grid, a, b, self.exec)
            .expect("grid validated at construction")
            .values
    }

    pub fn ss(&self) -> &DMatrix<Complex64> {
        self.ss
            .get_or_init(|| self.compute(Subset::Surveillance, Subset::Surveillance))
    }

    pub fn sc(&self) -> &DMatrix<Complex64> {
        self.sc
            .get_or_init(|| self.compute(Subset::Surveillance, Subset::Clutter))
    }

    pub fn cc(&self) -> &DMatrix<Complex64> {
        self.cc
            .get_or_init(|| self.compute(Subset::Clutter, Subset::Clutter))
    }
}
