//! Delay-Doppler test lattice and its surveillance/clutter partition.
//!
//! Columns of the replica matrix are ordered surveillance first, then clutter;
//! inside each block cells run Doppler-major (row by row), delay-minor. The
//! surveillance block maps onto a rectangular surface whose rows are the
//! Doppler bins holding at least one surveillance cell.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::signal::{doppler_phasor, ComplexSignal};

/// A lattice point, as indices into the grid's delay and Doppler axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub doppler: usize,
    pub delay: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Surveillance,
    Clutter,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Surveillance(usize),
    Clutter(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGrid {
    delay_bins: Vec<usize>,
    doppler_bins_hz: Vec<f64>,
    clutter_cells: Vec<Cell>,
    surveillance_cells: Vec<Cell>,
}

/// The delay-Doppler test lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct DDGrid {
    delay_bins: Vec<usize>,
    doppler_bins_hz: Vec<f64>,
    surveillance: Vec<Cell>,
    clutter: Vec<Cell>,
    // slots[doppler * n_delay + delay]
    slots: Vec<Slot>,
    surface_rows: Vec<usize>,
}

impl PartialEq for DDGrid {
    fn eq(&self, other: &Self) -> bool {
        self.delay_bins == other.delay_bins
            && self.doppler_bins_hz == other.doppler_bins_hz
            && self.surveillance == other.surveillance
            && self.clutter == other.clutter
    }
}

impl TryFrom<RawGrid> for DDGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        DDGrid::from_cells(
            raw.delay_bins,
            raw.doppler_bins_hz,
            raw.clutter_cells,
            raw.surveillance_cells,
        )
    }
}

impl From<DDGrid> for RawGrid {
    fn from(g: DDGrid) -> Self {
        RawGrid {
            delay_bins: g.delay_bins,
            doppler_bins_hz: g.doppler_bins_hz,
            clutter_cells: g.clutter,
            surveillance_cells: g.surveillance,
        }
    }
}

impl DDGrid {
    /// Build a grid from an explicit partition. Every lattice point must be
    /// listed exactly once across the two lists.
    pub fn from_cells(
        delay_bins: Vec<usize>,
        doppler_bins_hz: Vec<f64>,
        mut clutter: Vec<Cell>,
        mut surveillance: Vec<Cell>,
    ) -> Result<Self> {
        if delay_bins.is_empty() || doppler_bins_hz.is_empty() {
            return Err(Error::InvalidGrid("grid axes must be non-empty".into()));
        }
        if delay_bins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "delay bins must be strictly ascending".into(),
            ));
        }
        if doppler_bins_hz.iter().any(|f| !f.is_finite())
            || doppler_bins_hz.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidGrid(
                "doppler bins must be finite and strictly ascending".into(),
            ));
        }
        let (nd, nf) = (delay_bins.len(), doppler_bins_hz.len());
        clutter.sort();
        surveillance.sort();

        let mut slots: Vec<Option<Slot>> = vec![None; nd * nf];
        let mut place = |cell: &Cell, slot: Slot| -> Result<()> {
            if cell.delay >= nd || cell.doppler >= nf {
                return Err(Error::InvalidGrid(format!(
                    "cell {cell:?} lies outside the lattice"
                )));
            }
            let s = &mut slots[cell.doppler * nd + cell.delay];
            if s.is_some() {
                return Err(Error::InvalidGrid(format!(
                    "cell {cell:?} listed more than once"
                )));
            }
            *s = Some(slot);
            Ok(())
        };
        for (i, c) in surveillance.iter().enumerate() {
            place(c, Slot::Surveillance(i))?;
        }
        for (i, c) in clutter.iter().enumerate() {
            place(c, Slot::Clutter(i))?;
        }
        let slots = slots
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                Error::InvalidGrid("partition does not cover every lattice point".into())
            })?;

        let mut surface_rows: Vec<usize> = surveillance.iter().map(|c| c.doppler).collect();
        surface_rows.dedup();

        Ok(Self {
            delay_bins,
            doppler_bins_hz,
            surveillance,
            clutter,
            slots,
            surface_rows,
        })
    }

    /// Build a grid where whole Doppler rows (by index) are clutter and the
    /// rest is surveillance.
    pub fn from_rows(
        delay_bins: Vec<usize>,
        doppler_bins_hz: Vec<f64>,
        clutter_rows: &[usize],
    ) -> Result<Self> {
        let nd = delay_bins.len();
        let mut clutter = Vec::new();
        let mut surveillance = Vec::new();
        for doppler in 0..doppler_bins_hz.len() {
            let target = if clutter_rows.contains(&doppler) {
                &mut clutter
            } else {
                &mut surveillance
            };
            target.extend((0..nd).map(|delay| Cell { doppler, delay }));
        }
        Self::from_cells(delay_bins, doppler_bins_hz, clutter, surveillance)
    }

    pub fn delay_bins(&self) -> &[usize] {
        &self.delay_bins
    }

    pub fn doppler_bins_hz(&self) -> &[f64] {
        &self.doppler_bins_hz
    }

    pub fn surveillance_cells(&self) -> &[Cell] {
        &self.surveillance
    }

    pub fn clutter_cells(&self) -> &[Cell] {
        &self.clutter
    }

    pub fn n_surveillance(&self) -> usize {
        self.surveillance.len()
    }

    pub fn n_clutter(&self) -> usize {
        self.clutter.len()
    }

    pub fn n_cells(&self) -> usize {
        self.surveillance.len() + self.clutter.len()
    }

    pub fn max_delay(&self) -> usize {
        *self.delay_bins.last().expect("non-empty axis")
    }

    pub fn cells(&self, subset: Subset) -> Vec<Cell> {
        match subset {
            Subset::Surveillance => self.surveillance.clone(),
            Subset::Clutter => self.clutter.clone(),
            Subset::All => self
                .surveillance
                .iter()
                .chain(&self.clutter)
                .copied()
                .collect(),
        }
    }

    /// `(delay_samples, doppler_hz)` of a cell.
    pub fn shift_of(&self, cell: Cell) -> (usize, f64) {
        (
            self.delay_bins[cell.delay],
            self.doppler_bins_hz[cell.doppler],
        )
    }

    /// Column index of `cell` in `X = [X_s X_c]`.
    pub fn flat_index(&self, cell: Cell) -> Option<usize> {
        if cell.delay >= self.delay_bins.len() || cell.doppler >= self.doppler_bins_hz.len() {
            return None;
        }
        Some(
            match self.slots[cell.doppler * self.delay_bins.len() + cell.delay] {
                Slot::Surveillance(i) => i,
                Slot::Clutter(j) => self.surveillance.len() + j,
            },
        )
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn cell_at(&self, flat: usize) -> Option<Cell> {
        let ns = self.surveillance.len();
        if flat < ns {
            Some(self.surveillance[flat])
        } else {
            self.clutter.get(flat - ns).copied()
        }
    }

    pub fn is_clutter(&self, cell: Cell) -> bool {
        matches!(
            self.slots[cell.doppler * self.delay_bins.len() + cell.delay],
            Slot::Clutter(_)
        )
    }

    /// Doppler indices forming the rows of the surveillance surface.
    pub fn surface_rows(&self) -> &[usize] {
        &self.surface_rows
    }

    /// `(rows, cols)` of the surveillance surface.
    pub fn surface_shape(&self) -> (usize, usize) {
        (self.surface_rows.len(), self.delay_bins.len())
    }

    /// Surface coordinates of the `i`-th surveillance cell.
    pub fn surface_pos(&self, surveillance_index: usize) -> (usize, usize) {
        let cell = self.surveillance[surveillance_index];
        let row = self
            .surface_rows
            .binary_search(&cell.doppler)
            .expect("row of a surveillance cell");
        (row, cell.delay)
    }

    /// Surveillance index at a surface position, if that position is a
    /// surveillance cell.
    pub fn surveillance_index_at(&self, row: usize, col: usize) -> Option<usize> {
        let doppler = *self.surface_rows.get(row)?;
        if col >= self.delay_bins.len() {
            return None;
        }
        match self.slots[doppler * self.delay_bins.len() + col] {
            Slot::Surveillance(i) => Some(i),
            Slot::Clutter(_) => None,
        }
    }

    /// Check that every delay bin fits a signal of length `len`.
    pub fn check_fits(&self, len: usize) -> Result<()> {
        if self.max_delay() >= len {
            return Err(Error::DelayOutOfRange {
                delay: self.max_delay() as f64,
                len,
            });
        }
        Ok(())
    }
}

/// Grid with a zero-Doppler clutter row over whole-sample delays
/// `0..=floor(max_delay * fs)` and symmetric surveillance rows at multiples of
/// `doppler_step_hz`, from `max(1, floor(min/step))` up to `ceil(max/step)`.
pub fn build_default_grid(
    fs: f64,
    max_delay_seconds: f64,
    doppler_min_hz: f64,
    doppler_max_hz: f64,
    doppler_step_hz: f64,
) -> Result<DDGrid> {
    if !(fs > 0.0) {
        return Err(Error::InvalidParameter(
            "sample rate must be positive".into(),
        ));
    }
    if !(doppler_step_hz > 0.0) {
        return Err(Error::InvalidParameter(
            "doppler step must be positive".into(),
        ));
    }
    let span = max_delay_seconds * fs;
    if !(span + 1e-9 >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "max delay covers {span:.3} samples, need at least one"
        )));
    }
    let last_delay = (span + 1e-9).floor() as usize;

    let k_lo = ((doppler_min_hz / doppler_step_hz + 1e-9).floor() as i64).max(1);
    let k_hi = (doppler_max_hz / doppler_step_hz - 1e-9).ceil() as i64;
    if doppler_min_hz < 0.0 || doppler_min_hz > doppler_max_hz || k_hi < k_lo {
        return Err(Error::InvalidGrid(format!(
            "empty Doppler coverage for [{doppler_min_hz}, {doppler_max_hz}] Hz at step {doppler_step_hz} Hz"
        )));
    }
    let mut dopplers: Vec<f64> = (k_lo..=k_hi)
        .rev()
        .map(|k| -(k as f64) * doppler_step_hz)
        .collect();
    let zero_row = dopplers.len();
    dopplers.push(0.0);
    dopplers.extend((k_lo..=k_hi).map(|k| k as f64 * doppler_step_hz));

    DDGrid::from_rows((0..=last_delay).collect(), dopplers, &[zero_row])
}

/// Replica columns `shift_replica(x, delay(k), doppler(k))` for the cells of
/// `subset`, in canonical order, as a `T x K` matrix.
pub fn materialize_columns(
    x: &ComplexSignal,
    grid: &DDGrid,
    subset: Subset,
) -> Result<DMatrix<Complex64>> {
    materialize_columns_with(x, grid, subset, Exec::default())
}

pub fn materialize_columns_with(
    x: &ComplexSignal,
    grid: &DDGrid,
    subset: Subset,
    exec: Exec,
) -> Result<DMatrix<Complex64>> {
    let t = x.len();
    grid.check_fits(t)?;
    let cells = grid.cells(subset);
    let fs = x.sample_rate_hz();
    let src = x.samples();
    let mut data = vec![Complex64::new(0.0, 0.0); t * cells.len()];
    if !cells.is_empty() {
        exec.for_each_chunk_mut(&mut data, t, |k, col| {
            let (d, f) = grid.shift_of(cells[k]);
            for n in d..t {
                col[n] = if f == 0.0 {
                    src[n - d]
                } else {
                    src[n - d] * doppler_phasor(f, fs, n)
                };
            }
        });
    }
    Ok(DMatrix::from_vec(t, cells.len(), data))
}
