//! Batched Monte Carlo comparison of the classical and adapted pipelines.
//!
//! Everything that depends only on the reference (replica correlator, Gram
//! blocks, one factored filter per γ) is built once in [`Experiment::prepare`]
//! and shared read-only by all trials. Each trial draws its scene from a
//! seed derived from `(base_seed, trial_index)`, so trials can run in any
//! order and aggregation is an order-independent integer reduction.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caf::{CafEngine, DDSurface};
use crate::detection::{ca_cfar_with, score_trial, CfarConfig, ScoringConfig, TrialScore};
use crate::error::{Error, Result};
use crate::gram::GramCache;
use crate::grid::{build_default_grid, DDGrid};
use crate::ofdm::{generate_ofdm_reference, OfdmConfig};
use crate::par::Exec;
use crate::scene::{sample_scene, synthesize_capture, ClutterParams, SceneTruth, TargetParams};
use crate::signal::ComplexSignal;
use crate::solver::ImplicitFilter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Unadapted,
    Adapted,
    #[default]
    Both,
}

impl Pipeline {
    pub fn runs_unadapted(self) -> bool {
        matches!(self, Pipeline::Unadapted | Pipeline::Both)
    }

    pub fn runs_adapted(self) -> bool {
        matches!(self, Pipeline::Adapted | Pipeline::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub max_delay_seconds: f64,
    pub doppler_min_hz: f64,
    pub doppler_max_hz: f64,
    pub doppler_step_hz: f64,
    /// Treat the zero-Doppler row as clutter. When off, every cell is
    /// surveillance and the adapted filter has nothing to null.
    pub zero_doppler_clutter: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            max_delay_seconds: 4.0365e-6,
            doppler_min_hz: 0.0,
            doppler_max_hz: 1400.0,
            doppler_step_hz: 100.0,
            zero_doppler_clutter: true,
        }
    }
}

impl GridConfig {
    pub fn build(&self, fs: f64) -> Result<DDGrid> {
        let grid = build_default_grid(
            fs,
            self.max_delay_seconds,
            self.doppler_min_hz,
            self.doppler_max_hz,
            self.doppler_step_hz,
        )?;
        if self.zero_doppler_clutter {
            Ok(grid)
        } else {
            DDGrid::from_rows(
                grid.delay_bins().to_vec(),
                grid.doppler_bins_hz().to_vec(),
                &[],
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sample_rate_hz: f64,
    pub waveform: OfdmConfig,
    pub grid: GridConfig,
    pub clutter: ClutterParams,
    pub target: TargetParams,
    /// Window geometry; the tuned rate comes from `pfa_list`.
    pub cfar: CfarConfig,
    pub scoring: ScoringConfig,
    pub gamma_list: Vec<f64>,
    pub pfa_list: Vec<f64>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub pipeline: Pipeline,
}

impl Default for ExperimentConfig {
    /// Full-scale profile: 10 ms at 15.36 MS/s, 1000 clutter scatterers,
    /// 10000 trials.
    fn default() -> Self {
        Self {
            sample_rate_hz: 15.36e6,
            waveform: OfdmConfig::full_scale(),
            grid: GridConfig::default(),
            clutter: ClutterParams::default(),
            target: TargetParams::default(),
            cfar: CfarConfig::default(),
            scoring: ScoringConfig::default(),
            gamma_list: vec![0.98],
            pfa_list: vec![1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12],
            n_trials: 10_000,
            base_seed: 1,
            pipeline: Pipeline::Both,
        }
    }
}

/// Sample rate of the desk profile: keeps the 10 ms window (and with it the
/// 100 Hz Doppler resolution) at 4096 samples.
pub const DESK_SAMPLE_RATE_HZ: f64 = 409_600.0;

impl ExperimentConfig {
    /// Reduced profile that runs a full γ x pfa sweep in minutes.
    ///
    /// The observation window stays 10 ms, so Doppler bins keep their 100 Hz
    /// spacing and targets sit 3-13 bins off zero. Delays keep the same sample
    /// counts as the full-scale profile (clutter on 0..=63, targets on
    /// 6..57 samples). Target SNR is 22 dB and clutter RCS averages +4 dB.
    pub fn desk() -> Self {
        let fs = DESK_SAMPLE_RATE_HZ;
        Self {
            sample_rate_hz: fs,
            waveform: OfdmConfig::default(),
            grid: GridConfig {
                max_delay_seconds: 63.0 / fs,
                ..GridConfig::default()
            },
            clutter: ClutterParams {
                n_c: 50,
                rcs_mean_db: DESK_RCS_MEAN_DB,
                max_delay_seconds: 63.0 / fs,
                ..ClutterParams::default()
            },
            target: TargetParams {
                delay_min_s: 0.39e-6 * 15.36e6 / fs,
                delay_max_s: 3.71e-6 * 15.36e6 / fs,
                snr_mean_db: DESK_SNR_MEAN_DB,
                ..TargetParams::default()
            },
            gamma_list: vec![0.5, 0.9, 0.98, 1.0],
            pfa_list: vec![1e-2, 1e-4],
            n_trials: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "sample rate must be positive".into(),
            ));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter(
                "n_trials must be at least 1".into(),
            ));
        }
        if let Some(g) = self.gamma_list.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::InvalidParameter(format!("gamma {g} outside (0, 1]")));
        }
        if let Some(p) = self.pfa_list.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidParameter(format!("pfa {p} outside (0, 1)")));
        }
        if self.pipeline.runs_adapted() && self.gamma_list.is_empty() {
            return Err(Error::InvalidParameter(
                "adapted pipeline needs at least one gamma".into(),
            ));
        }
        if self.pfa_list.is_empty() {
            return Err(Error::InvalidParameter("pfa_list is empty".into()));
        }
        self.waveform.validate()?;
        self.scoring.validate()?;
        Ok(())
    }

    /// Scene seed for one trial: first word of the ChaCha stream `trial_index`
    /// under key `base_seed`.
    pub fn trial_seed(&self, trial_index: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(trial_index);
        rng.random()
    }
}

/// Target SNR mean used by [`ExperimentConfig::desk`].
pub const DESK_SNR_MEAN_DB: f64 = 22.0;

/// Clutter RCS mean used by [`ExperimentConfig::desk`].
pub const DESK_RCS_MEAN_DB: f64 = 4.0;

/// Scores of one trial at every tuned pfa, for each pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScores {
    /// One per entry of `pfa_list`; empty when the pipeline is off.
    pub unadapted: Vec<TrialScore>,
    /// `adapted[g][p]` for `gamma_list[g]`, `pfa_list[p]`.
    pub adapted: Vec<Vec<TrialScore>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<TrialScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Whether per-reference products are shared across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CacheMode {
    #[default]
    Shared,
    /// Rebuild Gram blocks and filters inside every trial (slow; for checks).
    PerTrial,
}

/// Reference-dependent state shared by all trials.
#[derive(Debug)]
pub struct Experiment {
    cfg: ExperimentConfig,
    reference: ComplexSignal,
    grid: DDGrid,
    engine: CafEngine,
    filters: Vec<ImplicitFilter>,
    cache_mode: CacheMode,
    exec: Exec,
}

/// Surfaces of one trial, for inspection and export.
#[derive(Debug, Clone)]
pub struct TrialSurfaces {
    pub truth: SceneTruth,
    pub unadapted: DDSurface,
    /// One per entry of `gamma_list`.
    pub adapted: Vec<DDSurface>,
}

impl Experiment {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        Self::prepare_with(cfg, Exec::default(), CacheMode::Shared)
    }

    pub fn prepare_with(cfg: &ExperimentConfig, exec: Exec, cache_mode: CacheMode) -> Result<Self> {
        cfg.validate()?;
        let reference = generate_ofdm_reference(&cfg.waveform, cfg.sample_rate_hz)?;
        let grid = cfg.grid.build(cfg.sample_rate_hz)?;
        let engine = CafEngine::with_exec(&reference, &grid, exec)?;
        let filters = match cache_mode {
            CacheMode::Shared if cfg.pipeline.runs_adapted() => {
                build_filters(&reference, &grid, &cfg.gamma_list, exec)?
            }
            _ => Vec::new(),
        };
        Ok(Self {
            cfg: cfg.clone(),
            reference,
            grid,
            engine,
            filters,
            cache_mode,
            exec,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &ComplexSignal {
        &self.reference
    }

    pub fn grid(&self) -> &DDGrid {
        &self.grid
    }

    pub fn engine(&self) -> &CafEngine {
        &self.engine
    }

    pub fn filters(&self) -> &[ImplicitFilter] {
        &self.filters
    }

    pub fn scene(&self, trial_index: u64) -> Result<SceneTruth> {
        sample_scene(
            &self.cfg.clutter,
            &self.cfg.target,
            self.cfg.sample_rate_hz,
            self.reference.energy(),
            self.cfg.trial_seed(trial_index),
        )
    }

    /// Classical and adapted surfaces for one trial.
    pub fn surfaces(&self, trial_index: u64) -> Result<TrialSurfaces> {
        let truth = self.scene(trial_index)?;
        let y = synthesize_capture(&self.reference, &truth)?;
        let (r_s, r_c) = self.engine.cross_correlations(&y)?;
        let unadapted = DDSurface::from_surveillance(&self.grid, &r_s)?.with_clutter(r_c.clone());
        let adapted = if self.cfg.pipeline.runs_adapted() {
            let rebuilt;
            let filters = match self.cache_mode {
                CacheMode::Shared => &self.filters,
                CacheMode::PerTrial => {
                    rebuilt = build_filters(
                        &self.reference,
                        &self.grid,
                        &self.cfg.gamma_list,
                        Exec::Sequential,
                    )?;
                    &rebuilt
                }
            };
            filters
                .iter()
                .map(|f| DDSurface::from_surveillance(&self.grid, &f.apply(&r_s, &r_c)?))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(TrialSurfaces {
            truth,
            unadapted,
            adapted,
        })
    }

    fn score_surface(&self, surface: &DDSurface, truth: &SceneTruth) -> Result<Vec<TrialScore>> {
        let power = surface.power();
        let (rows, cols) = surface.shape();
        self.cfg
            .pfa_list
            .iter()
            .map(|&pfa| {
                let cfar = CfarConfig {
                    pfa_tuned: pfa,
                    ..self.cfg.cfar.clone()
                };
                // Trials are the unit of parallel work.
                let mask = ca_cfar_with(&power, rows, cols, &cfar, Exec::Sequential)?;
                score_trial(
                    &mask,
                    truth,
                    &self.grid,
                    self.cfg.sample_rate_hz,
                    &self.cfg.scoring,
                )
            })
            .collect()
    }

    fn try_trial(&self, trial_index: u64) -> Result<TrialScores> {
        let s = self.surfaces(trial_index)?;
        let unadapted = if self.cfg.pipeline.runs_unadapted() {
            self.score_surface(&s.unadapted, &s.truth)?
        } else {
            Vec::new()
        };
        let adapted = s
            .adapted
            .iter()
            .map(|surf| self.score_surface(surf, &s.truth))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialScores { unadapted, adapted })
    }

    /// Run one trial. Failures are captured in the record.
    pub fn run_trial(&self, trial_index: u64) -> TrialRecord {
        let seed = self.cfg.trial_seed(trial_index);
        match self.try_trial(trial_index) {
            Ok(scores) => TrialRecord {
                trial: trial_index,
                seed,
                scores: Some(scores),
                error: None,
            },
            Err(e) => TrialRecord {
                trial: trial_index,
                seed,
                scores: None,
                error: Some(e.to_string()),
            },
        }
    }

    /// Run the given trials (in parallel when enabled) and aggregate.
    pub fn run_trials(&self, indices: &[u64]) -> MonteCarloResult {
        let records = self.exec.map(indices.len(), |i| self.run_trial(indices[i]));
        let table = RocTable::aggregate(&self.cfg, &records);
        MonteCarloResult { table, records }
    }

    pub fn run(&self) -> MonteCarloResult {
        let indices: Vec<u64> = (0..self.cfg.n_trials as u64).collect();
        self.run_trials(&indices)
    }
}

fn build_filters(
    x: &ComplexSignal,
    grid: &DDGrid,
    gammas: &[f64],
    exec: Exec,
) -> Result<Vec<ImplicitFilter>> {
    let cache = GramCache::with_exec(x, grid, exec)?;
    // Build all three blocks before any filter reads them.
    let _ = (cache.ss(), cache.sc(), cache.cc());
    exec.map(gammas.len(), |i| ImplicitFilter::reduced(&cache, gammas[i]))
        .into_iter()
        .collect()
}

/// Prepare the shared state and run a single trial.
///
/// Preparation dominates the cost; use [`Experiment::run_trial`] for more
/// than one trial.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    Ok(Experiment::prepare(cfg)?.run_trial(trial_index))
}

/// Prepare and run a whole experiment.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<MonteCarloResult> {
    Ok(Experiment::prepare(cfg)?.run())
}

pub fn run_montecarlo_with(cfg: &ExperimentConfig, exec: Exec) -> Result<MonteCarloResult> {
    Ok(Experiment::prepare_with(cfg, exec, CacheMode::Shared)?.run())
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub table: RocTable,
    pub records: Vec<TrialRecord>,
}

impl MonteCarloResult {
    pub fn n_failed(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// One JSON object per line, in trial order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub pipeline: Pipeline,
    /// `None` for the classical pipeline.
    pub gamma: Option<f64>,
    pub pfa_tuned: f64,
    pub pd: f64,
    pub pfa_observed: f64,
    pub n_trials: usize,
    pub n_targets: usize,
    pub n_detected: usize,
    pub n_eligible: usize,
    pub n_false_alarms: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RocTable {
    pub rows: Vec<RocRow>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    trials: usize,
    targets: usize,
    detected: usize,
    eligible: usize,
    false_alarms: usize,
}

impl Tally {
    fn add(&mut self, s: &TrialScore) {
        self.trials += 1;
        self.targets += s.detected.len();
        self.detected += s.n_detected();
        self.eligible += s.eligible_cells;
        self.false_alarms += s.false_alarm_cells;
    }

    fn row(self, pipeline: Pipeline, gamma: Option<f64>, pfa: f64) -> RocRow {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        RocRow {
            pipeline,
            gamma,
            pfa_tuned: pfa,
            pd: ratio(self.detected, self.targets),
            pfa_observed: ratio(self.false_alarms, self.eligible),
            n_trials: self.trials,
            n_targets: self.targets,
            n_detected: self.detected,
            n_eligible: self.eligible,
            n_false_alarms: self.false_alarms,
        }
    }
}

pub const ROC_CSV_HEADER: &str = "gamma,pfa_tuned,pd,pfa_observed,n_trials,n_targets,n_eligible";

impl RocTable {
    /// Pool successful trials into one row per (pipeline, γ, pfa).
    pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Self {
        let np = cfg.pfa_list.len();
        let mut classical = vec![Tally::default(); np];
        let mut adapted = vec![vec![Tally::default(); np]; cfg.gamma_list.len()];
        for scores in records.iter().filter_map(|r| r.scores.as_ref()) {
            for (t, s) in classical.iter_mut().zip(&scores.unadapted) {
                t.add(s);
            }
            for (row, per_gamma) in adapted.iter_mut().zip(&scores.adapted) {
                for (t, s) in row.iter_mut().zip(per_gamma) {
                    t.add(s);
                }
            }
        }
        let mut rows = Vec::new();
        if cfg.pipeline.runs_unadapted() {
            rows.extend(
                cfg.pfa_list
                    .iter()
                    .zip(&classical)
                    .map(|(&p, t)| t.row(Pipeline::Unadapted, None, p)),
            );
        }
        if cfg.pipeline.runs_adapted() {
            for (&g, tallies) in cfg.gamma_list.iter().zip(&adapted) {
                rows.extend(
                    cfg.pfa_list
                        .iter()
                        .zip(tallies)
                        .map(|(&p, t)| t.row(Pipeline::Adapted, Some(g), p)),
                );
            }
        }
        Self { rows }
    }

    pub fn rows_for(&self, pipeline: Pipeline) -> impl Iterator<Item = &RocRow> {
        self.rows.iter().filter(move |r| r.pipeline == pipeline)
    }

    pub fn find(&self, pipeline: Pipeline, gamma: Option<f64>, pfa: f64) -> Option<&RocRow> {
        self.rows
            .iter()
            .find(|r| r.pipeline == pipeline && r.gamma == gamma && r.pfa_tuned == pfa)
    }

    /// CSV for one pipeline. The classical pipeline leaves `gamma` empty.
    pub fn write_csv<W: Write>(&self, pipeline: Pipeline, mut w: W) -> Result<()> {
        writeln!(w, "{ROC_CSV_HEADER}")?;
        for r in self.rows_for(pipeline) {
            let gamma = r.gamma.map(|g| g.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                gamma, r.pfa_tuned, r.pd, r.pfa_observed, r.n_trials, r.n_targets, r.n_eligible
            )?;
        }
        Ok(())
    }
}
