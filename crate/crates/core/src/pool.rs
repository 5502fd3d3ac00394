//! Rubin's rules for a single scalar parameter.

use serde::{Deserialize, Serialize};

use crate::dist::t_quantile;
use crate::error::{Error, Result};
use crate::fmi::{check_level, clamp_gamma, gamma_ci, GammaInterval};

/// Analysis of one completed dataset: a point estimate and its squared
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationResult {
    pub estimate: f64,
    pub within_variance: f64,
}

impl ImputationResult {
    pub fn new(estimate: f64, within_variance: f64) -> Result<Self> {
        let r = ImputationResult { estimate, within_variance };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.estimate.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite estimate {}", self.estimate)));
        }
        if !self.within_variance.is_finite() || self.within_variance < 0.0 {
            return Err(Error::InvalidInput(format!("within variance must be finite and >= 0, got {}", self.within_variance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledAnalysis {
    pub m: usize,
    pub theta: f64,
    pub w_bar: f64,
    pub b: f64,
    pub v_total: f64,
    pub se: f64,
    /// Fraction of missing information, clamped away from 0 and 1.
    pub gamma_hat: f64,
    /// Unclamped `(1 + 1/m)·b / v_total`.
    pub gamma_hat_raw: f64,
    /// Large-sample degrees of freedom `(m - 1) / gamma_hat²`.
    pub df_hat: f64,
    pub gamma_interval: GammaInterval,
    pub theta_interval: (f64, f64),
    pub level: f64,
}

/// Pool `results` with Rubin's rules. `level` sets both the interval for
/// the fraction of missing information and the interval for the estimate.
pub fn pool(results: &[ImputationResult], level: f64) -> Result<PooledAnalysis> {
    let m = results.len();
    if m < 2 {
        return Err(Error::InsufficientImputations(m));
    }
    check_level(level)?;
    for r in results {
        r.validate()?;
    }
    let mf = m as f64;
    let theta = results.iter().map(|r| r.estimate).sum::<f64>() / mf;
    let w_bar = results.iter().map(|r| r.within_variance).sum::<f64>() / mf;
    let b = results.iter().map(|r| (r.estimate - theta).powi(2)).sum::<f64>() / (mf - 1.0);
    let inflated_b = (1.0 + 1.0 / mf) * b;
    let v_total = w_bar + inflated_b;
    if !(v_total > 0.0) {
        return Err(Error::InvalidInput("total variance is zero: identical estimates with zero within variance".into()));
    }
    let se = v_total.sqrt();
    let gamma_hat_raw = inflated_b / v_total;
    let gamma_hat = clamp_gamma(gamma_hat_raw)?;
    let df_hat = (mf - 1.0) / (gamma_hat * gamma_hat);
    let gamma_interval = gamma_ci(gamma_hat, m, level)?;
    let t = t_quantile(0.5 * (1.0 + level), df_hat)?;
    Ok(PooledAnalysis {
        m,
        theta,
        w_bar,
        b,
        v_total,
        se,
        gamma_hat,
        gamma_hat_raw,
        df_hat,
        gamma_interval,
        theta_interval: (theta - t * se, theta + t * se),
        level,
    })
}

/// Convenience wrapper over [`pool`] for parallel estimate/variance slices.
pub fn pool_slices(estimates: &[f64], variances: &[f64], level: f64) -> Result<PooledAnalysis> {
    if estimates.len() != variances.len() {
        return Err(Error::InvalidInput(format!(
            "{} estimates but {} variances",
            estimates.len(),
            variances.len()
        )));
    }
    let results: Vec<_> = estimates
        .iter()
        .zip(variances)
        .map(|(&estimate, &within_variance)| ImputationResult { estimate, within_variance })
        .collect();
    pool(&results, level)
}
