//! CFAR detection on delay-Doppler power surfaces and per-trial scoring.

mod cfar;
mod scoring;

pub use cfar::{ca_cfar, ca_cfar_with, cfar_threshold_factor, CfarConfig, DetectionMask};
pub use scoring::{
    score_trial, target_neighborhoods, ScoringConfig, TargetNeighborhood, TrialScore,
};
