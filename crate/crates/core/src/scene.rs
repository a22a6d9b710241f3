//! Randomized captures `y = X ρ + z`: discrete zero-Doppler clutter,
//! off-grid moving targets and unit-variance complex white noise.
//!
//! Clutter RCS and target SNR are both in dB relative to the unit noise
//! floor, with a unit-power reference. Target SNR is the matched-filter
//! output SNR: amplitude `10^(snr/20) / sqrt(energy(x))`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{fractional_target_replica, ComplexSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClutterParams {
    pub n_c: usize,
    pub rcs_mean_db: f64,
    pub rcs_std_db: f64,
    pub max_delay_seconds: f64,
}

impl Default for ClutterParams {
    fn default() -> Self {
        Self {
            n_c: 1000,
            rcs_mean_db: -6.0,
            rcs_std_db: 6.0,
            max_delay_seconds: 4.0365e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetParams {
    pub doppler_abs_min_hz: f64,
    pub doppler_abs_max_hz: f64,
    pub delay_min_s: f64,
    pub delay_max_s: f64,
    pub snr_mean_db: f64,
    pub snr_std_db: f64,
    pub count: usize,
}

impl Default for TargetParams {
    fn default() -> Self {
        Self {
            doppler_abs_min_hz: 300.0,
            doppler_abs_max_hz: 1300.0,
            delay_min_s: 0.39e-6,
            delay_max_s: 3.71e-6,
            snr_mean_db: 2.0,
            snr_std_db: 0.33,
            count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterScatterer {
    pub delay_samples: usize,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub snr_db: f64,
    pub amplitude: Complex64,
}

/// Ground truth for one simulated capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub clutter: Vec<ClutterScatterer>,
    pub targets: Vec<Target>,
    /// Seed of the noise stream; `None` synthesizes a noise-free capture.
    pub noise_seed: Option<u64>,
}

impl SceneTruth {
    pub fn empty(noise_seed: Option<u64>) -> Self {
        Self {
            clutter: Vec::new(),
            targets: Vec::new(),
            noise_seed,
        }
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_seed = None;
        self
    }
}

fn check_interval(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "{name}: invalid interval [{lo}, {hi}]"
        )));
    }
    Ok(())
}

fn normal(mean: f64, std: f64, what: &str) -> Result<Normal<f64>> {
    if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{what}: need finite mean and std >= 0, got ({mean}, {std})"
        )));
    }
    Normal::new(mean, std).map_err(|e| Error::InvalidParameter(format!("{what}: {e}")))
}

/// Draw one scene. `reference_energy` is `energy(x)` of the reference the
/// scene will be synthesized with; it sets target amplitudes from SNR.
pub fn sample_scene(
    cp: &ClutterParams,
    tp: &TargetParams,
    fs: f64,
    reference_energy: f64,
    seed: u64,
) -> Result<SceneTruth> {
    if !(fs > 0.0) || !(reference_energy > 0.0) {
        return Err(Error::InvalidParameter(
            "sample rate and reference energy must be positive".into(),
        ));
    }
    check_interval(
        "target |doppler|",
        tp.doppler_abs_min_hz,
        tp.doppler_abs_max_hz,
    )?;
    check_interval("target delay", tp.delay_min_s, tp.delay_max_s)?;
    if tp.doppler_abs_min_hz < 0.0 || tp.delay_min_s < 0.0 || !(cp.max_delay_seconds >= 0.0) {
        return Err(Error::InvalidParameter(
            "delays and Doppler magnitudes must be nonnegative".into(),
        ));
    }
    let rcs = normal(cp.rcs_mean_db, cp.rcs_std_db, "clutter RCS")?;
    let snr = normal(tp.snr_mean_db, tp.snr_std_db, "target SNR")?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last_delay = (cp.max_delay_seconds * fs + 1e-9).floor() as usize;
    let clutter = (0..cp.n_c)
        .map(|_| {
            let db: f64 = rcs.sample(&mut rng);
            let phase = rng.random::<f64>() * 2.0 * PI;
            ClutterScatterer {
                delay_samples: rng.random_range(0..=last_delay),
                amplitude: Complex64::from_polar(10f64.powf(db / 20.0), phase),
            }
        })
        .collect();

    let norm = 1.0 / reference_energy.sqrt();
    let targets = (0..tp.count)
        .map(|_| {
            let mag = tp.doppler_abs_min_hz
                + rng.random::<f64>() * (tp.doppler_abs_max_hz - tp.doppler_abs_min_hz);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let delay_s = tp.delay_min_s + rng.random::<f64>() * (tp.delay_max_s - tp.delay_min_s);
            let snr_db: f64 = snr.sample(&mut rng);
            let phase = rng.random::<f64>() * 2.0 * PI;
            Target {
                delay_s,
                doppler_hz: sign * mag,
                snr_db,
                amplitude: Complex64::from_polar(10f64.powf(snr_db / 20.0) * norm, phase),
            }
        })
        .collect();

    Ok(SceneTruth {
        clutter,
        targets,
        noise_seed: Some(rng.random()),
    })
}

/// Unit-variance circular complex Gaussian noise.
pub fn complex_noise(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
        .collect()
}

pub fn synthesize_capture(x: &ComplexSignal, truth: &SceneTruth) -> Result<ComplexSignal> {
    let t = x.len();
    let fs = x.sample_rate_hz();
    let src = x.samples();
    let mut y = vec![Complex64::new(0.0, 0.0); t];

    // Clutter lies on whole-sample delays at zero Doppler: accumulate by delay.
    let mut taps: Vec<Complex64> = Vec::new();
    for c in &truth.clutter {
        if c.delay_samples >= t {
            return Err(Error::DelayOutOfRange {
                delay: c.delay_samples as f64,
                len: t,
            });
        }
        if taps.len() <= c.delay_samples {
            taps.resize(c.delay_samples + 1, Complex64::new(0.0, 0.0));
        }
        taps[c.delay_samples] += c.amplitude;
    }
    for (d, a) in taps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for n in d..t {
            y[n] += a * src[n - d];
        }
    }

    for tg in &truth.targets {
        let r = fractional_target_replica(x, tg.delay_s, tg.doppler_hz)?;
        for (acc, v) in y.iter_mut().zip(r.samples()) {
            *acc += tg.amplitude * v;
        }
    }

    if let Some(seed) = truth.noise_seed {
        for (acc, z) in y.iter_mut().zip(complex_noise(t, seed)) {
            *acc += z;
        }
    }
    ComplexSignal::new(y, fs)
}
