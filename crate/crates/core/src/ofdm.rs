//! Synthetic cyclic-prefix OFDM reference waveform.
//!
//! Stands in for a broadcast/cellular illuminator: random QPSK on a centred
//! block of active subcarriers, band edges left empty, normalized to unit
//! average power.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    Qpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmConfig {
    pub num_subcarriers: usize,
    pub cp_length: usize,
    pub num_symbols: usize,
    pub active_subcarrier_fraction: f64,
    pub modulation: Modulation,
    pub seed: u64,
}

impl Default for OfdmConfig {
    /// 240 subcarriers + 16 CP, 16 symbols: a 4096-sample block with ~60 %
    /// occupancy, close to a 10 MHz LTE carrier in shape.
    fn default() -> Self {
        Self {
            num_subcarriers: 240,
            cp_length: 16,
            num_symbols: 16,
            active_subcarrier_fraction: 0.6,
            modulation: Modulation::Qpsk,
            seed: 0x0fd3,
        }
    }
}

impl OfdmConfig {
    /// 1024-point FFT with a 256-sample prefix, 120 symbols: exactly 10 ms at
    /// 15.36 MS/s, 600 of 1024 bins occupied.
    pub fn full_scale() -> Self {
        Self {
            num_subcarriers: 1024,
            cp_length: 256,
            num_symbols: 120,
            active_subcarrier_fraction: 600.0 / 1024.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(Error::InvalidParameter(
                "num_subcarriers must be positive".into(),
            ));
        }
        if self.num_symbols == 0 {
            return Err(Error::InvalidParameter(
                "num_symbols must be positive".into(),
            ));
        }
        if self.cp_length > self.num_subcarriers {
            return Err(Error::InvalidParameter(
                "cp_length must not exceed num_subcarriers".into(),
            ));
        }
        let f = self.active_subcarrier_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "active_subcarrier_fraction must lie in (0, 1], got {f}"
            )));
        }
        Ok(())
    }

    pub fn output_len(&self) -> usize {
        self.num_symbols * (self.num_subcarriers + self.cp_length)
    }

    /// FFT bin indices carrying data: the `K` bins closest to DC.
    fn active_bins(&self) -> Vec<usize> {
        let n = self.num_subcarriers;
        let k = ((self.active_subcarrier_fraction * n as f64).round() as usize).clamp(1, n);
        let lo = -((k / 2) as isize);
        (lo..lo + k as isize)
            .map(|f| f.rem_euclid(n as isize) as usize)
            .collect()
    }
}

/// Generate a unit-power CP-OFDM block. Deterministic for a fixed seed.
pub fn generate_ofdm_reference(cfg: &OfdmConfig, sample_rate_hz: f64) -> Result<ComplexSignal> {
    cfg.validate()?;
    let n = cfg.num_subcarriers;
    let active = cfg.active_bins();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);

    let mut out = Vec::with_capacity(cfg.output_len());
    let mut sym = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..cfg.num_symbols {
        sym.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &bin in &active {
            let re = if rng.random::<bool>() {
                FRAC_1_SQRT_2
            } else {
                -FRAC_1_SQRT_2
            };
            let im = if rng.random::<bool>() {
                FRAC_1_SQRT_2
            } else {
                -FRAC_1_SQRT_2
            };
            sym[bin] = Complex64::new(re, im);
        }
        ifft.process(&mut sym);
        out.extend_from_slice(&sym[n - cfg.cp_length..]);
        out.extend_from_slice(&sym);
    }

    let power = crate::signal::energy(&out) / out.len() as f64;
    let scale = 1.0 / power.sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    ComplexSignal::new(out, sample_rate_hz)
}
