//! Neighborhood-based detection and false-alarm scoring.
//!
//! A target counts as detected when any of the 2x2 cells bounding its
//! off-grid (delay, Doppler) position is flagged. Flags inside a target's
//! exclusion block are ignored; every other flagged surveillance cell is a
//! false alarm.

use serde::{Deserialize, Serialize};

use super::cfar::DetectionMask;
use crate::error::{Error, Result};
use crate::grid::DDGrid;
use crate::scene::SceneTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    /// Exclusion block height in Doppler rows.
    pub exclusion_doppler_cells: usize,
    /// Exclusion block width in delay columns.
    pub exclusion_delay_cells: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            exclusion_doppler_cells: 4,
            exclusion_delay_cells: 6,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        // The exclusion block must contain the 2x2 target block.
        if self.exclusion_doppler_cells < 2 || self.exclusion_delay_cells < 2 {
            return Err(Error::InvalidParameter(
                "exclusion neighborhood must be at least 2x2".into(),
            ));
        }
        Ok(())
    }
}

/// Inclusive surface-coordinate rectangles for one target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetNeighborhood {
    /// Top-left `(row, col)` of the 2x2 bounding block.
    pub corner: (usize, usize),
    pub exclusion_rows: (usize, usize),
    pub exclusion_cols: (usize, usize),
}

impl TargetNeighborhood {
    pub fn contains_target_cell(&self, row: usize, col: usize) -> bool {
        let (r, c) = self.corner;
        (r..=r + 1).contains(&row) && (c..=c + 1).contains(&col)
    }

    pub fn excludes(&self, row: usize, col: usize) -> bool {
        (self.exclusion_rows.0..=self.exclusion_rows.1).contains(&row)
            && (self.exclusion_cols.0..=self.exclusion_cols.1).contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialScore {
    pub detected: Vec<bool>,
    pub false_alarm_cells: usize,
    pub eligible_cells: usize,
    /// Flags landing in some target's 2x2 block.
    pub target_cell_flags: usize,
    /// Flags in an exclusion block but in no target block.
    pub excluded_flags: usize,
}

impl TrialScore {
    pub fn n_detected(&self) -> usize {
        self.detected.iter().filter(|&&d| d).count()
    }
}

/// Lower index of the pair of axis bins bracketing `pos`.
fn bracket(axis: &[f64], pos: f64) -> Option<usize> {
    let (first, last) = (*axis.first()?, *axis.last()?);
    if axis.len() < 2 || !(pos >= first - 1e-9 && pos <= last + 1e-9) {
        return None;
    }
    let upper = axis.partition_point(|&v| v <= pos);
    Some(upper.saturating_sub(1).min(axis.len() - 2))
}

/// Span of `extent` cells centred on the pair starting at `lo`, clipped to
/// `0..len`. An odd surplus goes to the high side.
fn centred(lo: usize, extent: usize, len: usize) -> (usize, usize) {
    let extra = extent - 2;
    let before = extra / 2;
    let after = extra - before;
    (lo.saturating_sub(before), (lo + 1 + after).min(len - 1))
}

pub fn target_neighborhoods(
    truth: &SceneTruth,
    grid: &DDGrid,
    fs: f64,
    cfg: &ScoringConfig,
) -> Result<Vec<TargetNeighborhood>> {
    cfg.validate()?;
    let (rows, cols) = grid.surface_shape();
    let delay_axis: Vec<f64> = grid.delay_bins().iter().map(|&d| d as f64).collect();
    let doppler_axis: Vec<f64> = grid
        .surface_rows()
        .iter()
        .map(|&r| grid.doppler_bins_hz()[r])
        .collect();
    truth
        .targets
        .iter()
        .map(|t| {
            let delay = t.delay_s * fs;
            let outside = || Error::TargetOutsideGrid {
                delay_samples: delay,
                doppler_hz: t.doppler_hz,
            };
            let c = bracket(&delay_axis, delay).ok_or_else(outside)?;
            let r = bracket(&doppler_axis, t.doppler_hz).ok_or_else(outside)?;
            Ok(TargetNeighborhood {
                corner: (r, c),
                exclusion_rows: centred(r, cfg.exclusion_doppler_cells, rows),
                exclusion_cols: centred(c, cfg.exclusion_delay_cells, cols),
            })
        })
        .collect()
}

pub fn score_trial(
    mask: &DetectionMask,
    truth: &SceneTruth,
    grid: &DDGrid,
    fs: f64,
    cfg: &ScoringConfig,
) -> Result<TrialScore> {
    let (rows, cols) = grid.surface_shape();
    if mask.shape() != (rows, cols) {
        return Err(Error::InvalidParameter(format!(
            "mask shape {:?} does not match surface {:?}",
            mask.shape(),
            (rows, cols)
        )));
    }
    let hoods = target_neighborhoods(truth, grid, fs, cfg)?;

    let detected = hoods
        .iter()
        .map(|h| {
            let (r, c) = h.corner;
            (r..=r + 1).any(|i| (c..=c + 1).any(|j| mask.get(i, j)))
        })
        .collect();

    let mut score = TrialScore {
        detected,
        false_alarm_cells: 0,
        eligible_cells: 0,
        target_cell_flags: 0,
        excluded_flags: 0,
    };
    for row in 0..rows {
        for col in 0..cols {
            if grid.surveillance_index_at(row, col).is_none() {
                continue;
            }
            let excluded = hoods.iter().any(|h| h.excludes(row, col));
            if !excluded {
                score.eligible_cells += 1;
            }
            if !mask.get(row, col) {
                continue;
            }
            if hoods.iter().any(|h| h.contains_target_cell(row, col)) {
                score.target_cell_flags += 1;
            } else if excluded {
                score.excluded_flags += 1;
            } else {
                score.false_alarm_cells += 1;
            }
        }
    }
    Ok(score)
}
