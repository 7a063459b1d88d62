//! Discrepancy function and the minimum-discrepancy loss.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{cell_probs, CellGrid, Theta};

/// Default tuning constant.
pub const DEFAULT_C: f64 = 0.6;

/// Tuning constant `c ∈ [0, +∞]`; `c = +∞` gives maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyConfig {
    c: f64,
}

impl DiscrepancyConfig {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(Error::Domain(format!("tuning constant c = {c} must be nonnegative")));
        }
        Ok(Self { c })
    }

    pub fn ml() -> Self {
        Self { c: f64::INFINITY }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_ml(&self) -> bool {
        self.c == f64::INFINITY
    }
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        Self { c: DEFAULT_C }
    }
}

/// `φ(z)`: `(z+1)log(z+1)` on `[-1, c]`, linear continuation beyond `c`.
pub fn phi(z: f64, cfg: DiscrepancyConfig) -> Result<f64> {
    if z.is_nan() || z < -1.0 {
        return Err(Error::Domain(format!("Pearson residual {z} below -1")));
    }
    if z == -1.0 {
        return Ok(0.0);
    }
    let c = cfg.c;
    Ok(if z <= c {
        (z + 1.0) * (z + 1.0).ln()
    } else {
        (z + 1.0) * ((c + 1.0).ln() + 1.0) - c - 1.0
    })
}

/// Contribution `φ(f/π - 1) π` of one cell, written without the division
/// so that `π → 0` takes its limiting value.
pub(crate) fn cell_loss(f: f64, pi: f64, c: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f <= (c + 1.0) * pi {
        f * (f / pi).ln()
    } else if c.is_finite() {
        f * ((c + 1.0).ln() + 1.0) - (c + 1.0) * pi
    } else {
        f64::INFINITY
    }
}

pub(crate) fn loss_from_probs(probs: &[f64], freqs: &[f64], c: f64) -> f64 {
    probs.iter().zip(freqs).map(|(&p, &f)| cell_loss(f, p, c)).sum()
}

/// `L(θ, f̂) = Σ φ(f̂/π - 1) π`.
pub fn loss(theta: &Theta, f_hat: &CellGrid, cfg: DiscrepancyConfig) -> Result<f64> {
    if f_hat.kx() != theta.kx() || f_hat.ky() != theta.ky() {
        return Err(Error::Dimension(format!(
            "{}x{} frequencies for a {}x{} model",
            f_hat.kx(),
            f_hat.ky(),
            theta.kx(),
            theta.ky()
        )));
    }
    Ok(loss_from_probs(cell_probs(theta).values(), f_hat.values(), cfg.c))
}
