//! Classical cross-ambiguity (matched filter bank) processing.
//!
//! A cell's value is the inner product `<replica(cell), y>`, conjugating the
//! replica. The FFT path evaluates a whole Doppler row at once: modulate `y`
//! down by the row frequency, then correlate against the reference for all
//! lags with one zero-padded transform pair.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DDGrid, Subset};
use crate::par::Exec;
use crate::signal::{doppler_phasor, ComplexSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Raw,
    Peak0dB,
}

/// Surveillance delay-Doppler surface, stored row-major (Doppler rows).
#[derive(Debug, Clone, PartialEq)]
pub struct DDSurface {
    rows: usize,
    cols: usize,
    values: Vec<Complex64>,
    clutter: Option<Vec<Complex64>>,
    normalization: Normalization,
}

impl DDSurface {
    pub fn from_rows(rows: usize, cols: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            clutter: None,
            normalization: Normalization::Raw,
        })
    }

    /// Place surveillance responses (canonical order) onto the surface.
    /// Clutter cells sharing a surface row are left at zero.
    pub fn from_surveillance(grid: &DDGrid, rho_s: &[Complex64]) -> Result<Self> {
        if rho_s.len() != grid.n_surveillance() {
            return Err(Error::LengthMismatch {
                expected: grid.n_surveillance(),
                actual: rho_s.len(),
            });
        }
        let (rows, cols) = grid.surface_shape();
        let mut values = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (i, v) in rho_s.iter().enumerate() {
            let (r, c) = grid.surface_pos(i);
            values[r * cols + c] = *v;
        }
        Self::from_rows(rows, cols, values)
    }

    /// Surface over every Doppler row of the grid, clutter rows included.
    /// `rho` holds all responses in canonical `[s, c]` order.
    pub fn full_grid(grid: &DDGrid, rho: &[Complex64]) -> Result<Self> {
        if rho.len() != grid.n_cells() {
            return Err(Error::LengthMismatch {
                expected: grid.n_cells(),
                actual: rho.len(),
            });
        }
        let (rows, cols) = (grid.doppler_bins_hz().len(), grid.delay_bins().len());
        let mut values = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (k, v) in rho.iter().enumerate() {
            let cell = grid.cell_at(k).expect("index below n_cells");
            values[cell.doppler * cols + cell.delay] = *v;
        }
        Self::from_rows(rows, cols, values)
    }

    /// Surveillance responses in canonical order (inverse of `from_surveillance`).
    pub fn surveillance_values(&self, grid: &DDGrid) -> Vec<Complex64> {
        (0..grid.n_surveillance())
            .map(|i| {
                let (r, c) = grid.surface_pos(i);
                self.values[r * self.cols + c]
            })
            .collect()
    }

    pub fn with_clutter(mut self, clutter: Vec<Complex64>) -> Self {
        self.clutter = Some(clutter);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.cols + col]
    }

    /// Responses of the clutter cells, when the producing pipeline has them.
    pub fn clutter(&self) -> Option<&[Complex64]> {
        self.clutter.as_deref()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Squared magnitudes, row-major.
    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `(row, col, |value|)` of the largest-magnitude cell.
    pub fn peak(&self) -> (usize, usize, f64) {
        let (idx, mag) = self.values.iter().map(|v| v.norm()).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, m)| if m > best.1 { (i, m) } else { best },
        );
        (idx / self.cols, idx % self.cols, mag)
    }

    /// Scale so the largest surveillance magnitude is exactly one. The clutter
    /// responses, if present, are scaled by the same factor. A zero surface is
    /// returned unchanged.
    pub fn normalized(&self) -> Self {
        let (_, _, peak) = self.peak();
        let mut out = self.clone();
        out.normalization = Normalization::Peak0dB;
        if peak > 0.0 {
            let s = 1.0 / peak;
            out.values.iter_mut().for_each(|v| *v *= s);
            if let Some(c) = out.clutter.as_mut() {
                c.iter_mut().for_each(|v| *v *= s);
            }
        }
        out
    }

    /// Magnitude in dB per cell, row-major. Peak-normalized surfaces are
    /// measured against their largest power, so the peak reads exactly 0 dB.
    pub fn magnitude_db(&self) -> Vec<f64> {
        let power = self.power();
        let reference = match self.normalization {
            Normalization::Raw => 1.0,
            Normalization::Peak0dB => power.iter().copied().fold(0.0, f64::max),
        };
        let reference = if reference > 0.0 { reference } else { 1.0 };
        power
            .iter()
            .map(|p| 10.0 * (p / reference).log10())
            .collect()
    }

    /// Frobenius norm of the surface values.
    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Write the DDS1 binary dump: `b"DDS1"`, u32 rows, u32 cols, u32 zero
    /// (reserved), then interleaved little-endian f32 re/im, row-major.
    pub fn write_dds1<W: Write>(&self, mut w: W) -> Result<()> {
        let rows =
            u32::try_from(self.rows).map_err(|_| Error::Format("too many rows for DDS1".into()))?;
        let cols = u32::try_from(self.cols)
            .map_err(|_| Error::Format("too many columns for DDS1".into()))?;
        let mut buf = Vec::with_capacity(16 + 8 * self.values.len());
        buf.extend_from_slice(b"DDS1");
        buf.extend_from_slice(&rows.to_le_bytes());
        buf.extend_from_slice(&cols.to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_dds1<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != b"DDS1" {
            return Err(Error::Format("missing DDS1 magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let (rows, cols) = (word(4), word(8));
        let mut body = vec![0u8; rows * cols * 8];
        r.read_exact(&mut body)?;
        let values = body
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Self::from_rows(rows, cols, values)
    }
}

/// Precomputed reference spectrum and FFT plans for one `(x, grid)` pair.
///
/// Build once per reference; [`CafEngine::correlate`] then only transforms
/// the capture.
pub struct CafEngine {
    grid: DDGrid,
    len: usize,
    fs: f64,
    fft_len: usize,
    ref_spectrum_conj: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    exec: Exec,
}

impl std::fmt::Debug for CafEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CafEngine")
            .field("len", &self.len)
            .field("fft_len", &self.fft_len)
            .field("cells", &self.grid.n_cells())
            .finish()
    }
}

impl CafEngine {
    pub fn new(x: &ComplexSignal, grid: &DDGrid) -> Result<Self> {
        Self::with_exec(x, grid, Exec::default())
    }

    pub fn with_exec(x: &ComplexSignal, grid: &DDGrid, exec: Exec) -> Result<Self> {
        let len = x.len();
        grid.check_fits(len)?;
        let fft_len = (len + grid.max_delay()).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
        spectrum[..len].copy_from_slice(x.samples());
        forward.process(&mut spectrum);
        let scale = 1.0 / fft_len as f64;
        spectrum.iter_mut().for_each(|v| *v = v.conj() * scale);
        Ok(Self {
            grid: grid.clone(),
            len,
            fs: x.sample_rate_hz(),
            fft_len,
            ref_spectrum_conj: spectrum,
            forward,
            inverse,
            exec,
        })
    }

    pub fn grid(&self) -> &DDGrid {
        &self.grid
    }

    pub fn signal_len(&self) -> usize {
        self.len
    }

    /// `X* y` over every grid cell, in canonical column order `[r_s, r_c]`.
    pub fn correlate(&self, y: &ComplexSignal) -> Result<Vec<Complex64>> {
        if y.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: y.len(),
            });
        }
        let dopplers = self.grid.doppler_bins_hz();
        let delays = self.grid.delay_bins();
        let rows: Vec<Vec<Complex64>> = self.exec.map(dopplers.len(), |row| {
            let f = dopplers[row];
            let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
            for (n, (b, v)) in buf.iter_mut().zip(y.samples()).enumerate() {
                *b = if f == 0.0 {
                    *v
                } else {
                    v * doppler_phasor(-f, self.fs, n)
                };
            }
            self.forward.process(&mut buf);
            buf.iter_mut()
                .zip(&self.ref_spectrum_conj)
                .for_each(|(b, r)| *b *= r);
            self.inverse.process(&mut buf);
            delays.iter().map(|&d| buf[d]).collect()
        });

        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n_cells()];
        for (k, cell) in self.grid.cells(Subset::All).into_iter().enumerate() {
            out[k] = rows[cell.doppler][cell.delay];
        }
        Ok(out)
    }

    /// Split correlations into `(r_s, r_c)`.
    pub fn cross_correlations(
        &self,
        y: &ComplexSignal,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let mut all = self.correlate(y)?;
        let r_c = all.split_off(self.grid.n_surveillance());
        Ok((all, r_c))
    }

    /// Classical surface, with the clutter responses attached.
    pub fn surface(&self, y: &ComplexSignal) -> Result<DDSurface> {
        let (r_s, r_c) = self.cross_correlations(y)?;
        Ok(DDSurface::from_surveillance(&self.grid, &r_s)?.with_clutter(r_c))
    }
}

/// Classical delay-Doppler surface `X* y` (FFT path).
pub fn classical_caf(x: &ComplexSignal, y: &ComplexSignal, grid: &DDGrid) -> Result<DDSurface> {
    check_lengths(x, y)?;
    CafEngine::new(x, grid)?.surface(y)
}

/// `(X_s* y, X_c* y)` in canonical order (FFT path).
pub fn cross_correlations(
    x: &ComplexSignal,
    y: &ComplexSignal,
    grid: &DDGrid,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    check_lengths(x, y)?;
    CafEngine::new(x, grid)?.cross_correlations(y)
}

/// Direct inner-product evaluation of `X* y`, one cell at a time.
pub fn correlate_direct(
    x: &ComplexSignal,
    y: &ComplexSignal,
    grid: &DDGrid,
) -> Result<Vec<Complex64>> {
    check_lengths(x, y)?;
    grid.check_fits(x.len())?;
    let t = x.len();
    let fs = x.sample_rate_hz();
    let (xs, ys) = (x.samples(), y.samples());
    Ok(grid
        .cells(Subset::All)
        .into_iter()
        .map(|cell| {
            let (d, f) = grid.shift_of(cell);
            (d..t)
                .map(|n| (xs[n - d] * doppler_phasor(f, fs, n)).conj() * ys[n])
                .sum()
        })
        .collect())
}

/// Direct-path classical surface.
pub fn classical_caf_direct(
    x: &ComplexSignal,
    y: &ComplexSignal,
    grid: &DDGrid,
) -> Result<DDSurface> {
    let mut all = correlate_direct(x, y, grid)?;
    let r_c = all.split_off(grid.n_surveillance());
    Ok(DDSurface::from_surveillance(grid, &all)?.with_clutter(r_c))
}

fn check_lengths(x: &ComplexSignal, y: &ComplexSignal) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}
