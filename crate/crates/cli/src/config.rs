//! TOML run configuration.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected. Defaults reproduce the full-scale study (15.36 MS/s, 10 ms,
//! 1000 clutter scatterers, 10000 trials); `configs/desk.toml` holds the
//! reduced profile.

use std::path::{Path, PathBuf};

use ddadapt_core::detection::{CfarConfig, ScoringConfig};
use ddadapt_core::harness::{ExperimentConfig, GridConfig, Pipeline};
use ddadapt_core::{ClutterParams, OfdmConfig, TargetParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub sample_rate_hz: f64,
    pub n_trials: usize,
    pub base_seed: u64,
    pub gamma_list: Vec<f64>,
    pub pfa_list: Vec<f64>,
    pub pipeline: Pipeline,
}

/// CFAR window geometry. Tuned rates come from `run.pfa_list`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfarSection {
    pub guard_delay: usize,
    pub guard_doppler: usize,
    pub train_delay: usize,
    pub train_doppler: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub run: RunSection,
    pub waveform: OfdmConfig,
    pub grid: GridConfig,
    pub clutter: ClutterParams,
    pub target: TargetParams,
    pub cfar: CfarSection,
    pub scoring: ScoringConfig,
    pub output: OutputSection,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self::from_experiment(&ExperimentConfig::default())
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunConfigFile::default().run
    }
}

impl Default for CfarSection {
    fn default() -> Self {
        RunConfigFile::default().cfar
    }
}

impl RunConfigFile {
    pub fn from_experiment(e: &ExperimentConfig) -> Self {
        Self {
            run: RunSection {
                sample_rate_hz: e.sample_rate_hz,
                n_trials: e.n_trials,
                base_seed: e.base_seed,
                gamma_list: e.gamma_list.clone(),
                pfa_list: e.pfa_list.clone(),
                pipeline: e.pipeline,
            },
            waveform: e.waveform.clone(),
            grid: e.grid.clone(),
            clutter: e.clutter.clone(),
            target: e.target.clone(),
            cfar: CfarSection {
                guard_delay: e.cfar.guard_delay,
                guard_doppler: e.cfar.guard_doppler,
                train_delay: e.cfar.train_delay,
                train_doppler: e.cfar.train_doppler,
            },
            scoring: e.scoring.clone(),
            output: OutputSection::default(),
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            sample_rate_hz: self.run.sample_rate_hz,
            waveform: self.waveform.clone(),
            grid: self.grid.clone(),
            clutter: self.clutter.clone(),
            target: self.target.clone(),
            cfar: CfarConfig {
                guard_delay: self.cfar.guard_delay,
                guard_doppler: self.cfar.guard_doppler,
                train_delay: self.cfar.train_delay,
                train_doppler: self.cfar.train_doppler,
                ..CfarConfig::default()
            },
            scoring: self.scoring.clone(),
            gamma_list: self.run.gamma_list.clone(),
            pfa_list: self.run.pfa_list.clone(),
            n_trials: self.run.n_trials,
            base_seed: self.run.base_seed,
            pipeline: self.run.pipeline,
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfigFile::parse("").unwrap();
        assert_eq!(cfg, RunConfigFile::default());
        assert_eq!(cfg.experiment(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfigFile::from_experiment(&ExperimentConfig::desk());
        let back = RunConfigFile::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.experiment(), ExperimentConfig::desk());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = RunConfigFile::parse("[clutter]\nn_c = 3\nrcs_mean = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("rcs_mean"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        assert!(RunConfigFile::parse("[bogus]\n").is_err());
        assert!(RunConfigFile::parse("[cfar]\npfa_tuned = 0.1\n").is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg =
            RunConfigFile::parse("[run]\nn_trials = 7\n[target]\nsnr_mean_db = 9.5\n").unwrap();
        assert_eq!(cfg.run.n_trials, 7);
        assert_eq!(cfg.target.snr_mean_db, 9.5);
        assert_eq!(cfg.target.snr_std_db, TargetParams::default().snr_std_db);
        assert_eq!(cfg.run.pfa_list, ExperimentConfig::default().pfa_list);
    }

    #[test]
    fn shipped_desk_profile_matches_library() {
        let text = include_str!("../../../configs/desk.toml");
        let cfg = RunConfigFile::parse(text).unwrap();
        assert_eq!(cfg.experiment(), ExperimentConfig::desk());
    }
}
