//! Inference for the fraction of missing information.
//!
//! The interval is built on the logit scale, `logit(gamma) ± z·sqrt(2/m)`,
//! and mapped back with the inverse logit so it always stays inside (0, 1).

use serde::Serialize;

use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::GAMMA_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub m: usize,
}

impl GammaInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, gamma: f64) -> bool {
        self.lower <= gamma && gamma <= self.upper
    }
}

pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("logit needs p in (0, 1), got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clamp into `[GAMMA_EPS, 1 - GAMMA_EPS]`. Values outside `[0, 1]` are
/// rejected rather than clamped.
pub fn clamp_gamma(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("fraction of missing information must lie in [0, 1], got {gamma}")));
    }
    Ok(gamma.clamp(GAMMA_EPS, 1.0 - GAMMA_EPS))
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Confidence interval for the fraction of missing information estimated
/// from `m` imputations.
pub fn gamma_ci(gamma_hat: f64, m: usize, level: f64) -> Result<GammaInterval> {
    if m < 2 {
        return Err(Error::InsufficientImputations(m));
    }
    check_level(level)?;
    let point = clamp_gamma(gamma_hat)?;
    let z = normal_quantile(0.5 * (1.0 + level))?;
    let centre = logit(point)?;
    let half = z * (2.0 / m as f64).sqrt();
    Ok(GammaInterval {
        point,
        lower: inv_logit(centre - half),
        upper: inv_logit(centre + half),
        level,
        m,
    })
}

/// One interval per `(gamma, m)` pair, gammas in the outer loop.
pub fn table1(gammas: &[f64], ms: &[usize], level: f64) -> Result<Vec<GammaInterval>> {
    let mut out = Vec::with_capacity(gammas.len() * ms.len());
    for &g in gammas {
        for &m in ms {
            out.push(gamma_ci(g, m, level)?);
        }
    }
    Ok(out)
}

/// The published grid: gammas .1 to .9 by .2, with 5, 10, 15 and 20 imputations.
pub fn table1_default() -> Vec<GammaInterval> {
    table1(&[0.1, 0.3, 0.5, 0.7, 0.9], &[5, 10, 15, 20], 0.95).expect("fixed grid is valid")
}

/// Round half away from zero to two decimals, as the table is displayed.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
