//! Clutter-suppressing adaptive delay-Doppler processing for passive radar.
//!
//! The crate builds a linear replica model of the reference signal on a
//! delay-Doppler grid, computes the classical cross-ambiguity surface, and
//! synthesizes an adaptive filter bank that nulls a designated clutter
//! subspace while staying close to the matched filter elsewhere. A scene
//! simulator, CA-CFAR detector and Monte Carlo harness compare the two
//! pipelines.
//!
//! ```
//! use ddadapt_core::{build_default_grid, generate_ofdm_reference, OfdmConfig};
//! use ddadapt_core::{adapted_response_fast, classical_caf};
//!
//! let fs = 409_600.0;
//! let x = generate_ofdm_reference(&OfdmConfig { num_symbols: 2, ..OfdmConfig::default() }, fs).unwrap();
//! let grid = build_default_grid(fs, 8.0 / fs, 0.0, 400.0, 100.0).unwrap();
//! let classical = classical_caf(&x, &x, &grid).unwrap();
//! let adapted = adapted_response_fast(&x, &x, &grid, 0.98).unwrap();
//! assert_eq!(adapted.shape(), classical.shape());
//! assert_eq!(classical.shape(), grid.surface_shape());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caf;
pub mod detection;
pub mod error;
pub mod gram;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod ofdm;
pub mod par;
pub mod scene;
pub mod signal;
pub mod solver;

pub use caf::{classical_caf, CafEngine, DDSurface, Normalization};
pub use detection::{
    ca_cfar, cfar_threshold_factor, score_trial, target_neighborhoods, CfarConfig, DetectionMask,
    ScoringConfig, TrialScore,
};
pub use error::{Error, Result};
pub use gram::{gram, GramCache, GramMatrix};
pub use grid::{build_default_grid, Cell, DDGrid, Subset};
pub use harness::{run_montecarlo, run_trial, Experiment, ExperimentConfig, Pipeline, RocTable};
pub use ofdm::{generate_ofdm_reference, OfdmConfig};
pub use par::Exec;
pub use scene::{sample_scene, synthesize_capture, ClutterParams, SceneTruth, TargetParams};
pub use signal::{shift_replica, ComplexSignal};
pub use solver::{adapted_response_fast, solve_dense, GammaWeights, ImplicitFilter};
