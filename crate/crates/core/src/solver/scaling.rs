//! Check that reallocating weight between `γ1` and `γ2` only rescales the
//! filter bank.

use super::dense::solve_dense;
use super::GammaWeights;
use crate::error::{Error, Result};
use crate::grid::DDGrid;
use crate::signal::ComplexSignal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    /// Predicted ratio `U_s(w1) / U_s(w2) = (γ2 + γ3)_1 / (γ2 + γ3)_2`.
    pub predicted: f64,
    /// Largest `|U1 - c U2| / max|U1|` over all entries.
    pub max_deviation: f64,
}

pub fn weight_split_factorization(
    x: &ComplexSignal,
    grid: &DDGrid,
    w1: &GammaWeights,
    w2: &GammaWeights,
) -> Result<ScalingReport> {
    w1.validate()?;
    w2.validate()?;
    if (w1.gamma() - w2.gamma()).abs() > 1e-12 || (w1.gamma3 - w2.gamma3).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "weights must share γ1 + γ2 and γ3: {w1:?} vs {w2:?}"
        )));
    }
    let predicted = w1.scale() / w2.scale();
    if w1 == w2 {
        return Ok(ScalingReport {
            predicted,
            max_deviation: 0.0,
        });
    }
    let u1 = solve_dense(x, grid, w1)?.u_s;
    let u2 = solve_dense(x, grid, w2)?.u_s;
    let peak = u1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let max_deviation = u1
        .iter()
        .zip(u2.iter())
        .map(|(a, b)| (a - b * predicted).norm())
        .fold(0.0, f64::max)
        / peak.max(f64::MIN_POSITIVE);
    Ok(ScalingReport {
        predicted,
        max_deviation,
    })
}
