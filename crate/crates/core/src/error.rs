use thiserror::Error;

/// Errors produced by the processing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("delay {delay} out of range for signal of length {len}")]
    DelayOutOfRange { delay: f64, len: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("matrix `{what}` is singular or not positive definite")]
    Singular { what: &'static str },

    #[error("matrix `{what}` is ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { what: &'static str, cond: f64 },

    #[error("dense solve needs a {rows}x{rows} matrix, above the cap of {cap}")]
    TooLarge { rows: usize, cap: usize },

    #[error("surface of {rows}x{cols} is too small for the CFAR window")]
    SurfaceTooSmall { rows: usize, cols: usize },

    #[error("target at delay {delay_samples:.3} samples, doppler {doppler_hz:.3} Hz lies outside the grid")]
    TargetOutsideGrid { delay_samples: f64, doppler_hz: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors raised by the numerical core rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::IllConditioned { .. } | Error::TooLarge { .. }
        )
    }
}
