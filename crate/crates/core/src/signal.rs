//! Complex baseband signals and the delay/Doppler shift operators that
//! produce replica columns.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite block of complex baseband samples at a fixed sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "signal must have at least one sample".into(),
            ));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// All-zero signal of length `len`.
    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }

    pub fn mean_power(&self) -> f64 {
        self.energy() / self.len() as f64
    }

    /// `self += scale * other`, sample by sample.
    pub fn add_scaled(&mut self, other: &ComplexSignal, scale: Complex64) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += scale * b;
        }
        Ok(())
    }
}

pub fn energy(samples: &[Complex64]) -> f64 {
    samples.iter().map(|s| s.norm_sqr()).sum()
}

/// Unit phasor `exp(i 2π f n / fs)` for sample index `n`.
#[inline]
pub(crate) fn doppler_phasor(doppler_hz: f64, fs: f64, n: usize) -> Complex64 {
    // Reduce the cycle count before scaling by 2π to keep large n accurate.
    let cycles = (doppler_hz / fs) * n as f64;
    Complex64::from_polar(1.0, 2.0 * PI * (cycles - cycles.round()))
}

/// Delayed, Doppler-modulated copy of `x`:
/// `out[n] = x[n - d] exp(i 2π f n / fs)` for `n >= d`, zero before.
///
/// The delay is linear: samples pushed past the end of the window are dropped.
pub fn shift_replica(
    x: &ComplexSignal,
    delay_samples: usize,
    doppler_hz: f64,
) -> Result<ComplexSignal> {
    let len = x.len();
    if delay_samples >= len {
        return Err(Error::DelayOutOfRange {
            delay: delay_samples as f64,
            len,
        });
    }
    let fs = x.sample_rate_hz();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let src = x.samples();
    if doppler_hz == 0.0 {
        out[delay_samples..].copy_from_slice(&src[..len - delay_samples]);
    } else {
        for n in delay_samples..len {
            out[n] = src[n - delay_samples] * doppler_phasor(doppler_hz, fs, n);
        }
    }
    ComplexSignal::new(out, fs)
}

/// Replica with an arbitrary (off-grid) delay in seconds.
///
/// The delay is applied as a linear phase ramp across the full-length DFT of
/// `x`, followed by Doppler modulation. Samples before the (rounded up) delay
/// are zeroed so that integer delays reproduce [`shift_replica`].
pub fn fractional_target_replica(
    x: &ComplexSignal,
    delay_seconds: f64,
    doppler_hz: f64,
) -> Result<ComplexSignal> {
    let len = x.len();
    let fs = x.sample_rate_hz();
    let delay = delay_seconds * fs;
    if !(delay >= 0.0 && delay < len as f64) {
        return Err(Error::DelayOutOfRange { delay, len });
    }

    let mut buf = x.samples().to_vec();
    if delay != 0.0 {
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(len).process(&mut buf);
        let scale = 1.0 / len as f64;
        for (k, v) in buf.iter_mut().enumerate() {
            let freq = if k <= len / 2 {
                k as f64
            } else {
                k as f64 - len as f64
            };
            // Phase in cycles, reduced before scaling for accuracy.
            let cycles = freq * delay / len as f64;
            *v *= Complex64::from_polar(scale, -2.0 * PI * (cycles - cycles.round()));
        }
        planner.plan_fft_inverse(len).process(&mut buf);

        let head = ((delay - 1e-9).ceil().max(0.0) as usize).min(len);
        buf[..head]
            .iter_mut()
            .for_each(|v| *v = Complex64::new(0.0, 0.0));
    }

    if doppler_hz != 0.0 {
        for (n, v) in buf.iter_mut().enumerate() {
            *v *= doppler_phasor(doppler_hz, fs, n);
        }
    }
    ComplexSignal::new(buf, fs)
}
