//! How many imputations are needed for a replicable standard error.
//!
//! Every rule here reduces to the quadratic form
//! `m = 1 + df·gamma²` with `df = 1 / (2·cv²)`, where `cv` is the
//! coefficient of variation of the pooled SE across re-imputations. A goal
//! on the SD of the SE, on the CV of the variance, or on the degrees of
//! freedom is converted to that form first.
//!
//! The two-stage recommendation plugs the upper confidence bound for the
//! fraction of missing information from a pilot analysis into the rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmi::gamma_ci;
use crate::pool::PooledAnalysis;

/// Default cap on any recommendation.
pub const DEFAULT_M_MAX: usize = 10_000;

/// Smallest recommendation; pooling needs a between-imputation variance.
pub const M_MIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    SdOfSe,
    CvOfSe,
    CvOfVariance,
    Df,
}

/// A replicability goal for the pooled standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicabilityTarget {
    pub kind: TargetKind,
    pub value: f64,
}

impl ReplicabilityTarget {
    pub fn new(kind: TargetKind, value: f64) -> Result<Self> {
        let ok = value.is_finite()
            && match kind {
                TargetKind::SdOfSe => value > 0.0,
                TargetKind::CvOfSe | TargetKind::CvOfVariance => value > 0.0 && value < 1.0,
                TargetKind::Df => value >= 1.0,
            };
        if !ok {
            return Err(Error::InvalidTarget(format!("{kind:?} target out of range: {value}")));
        }
        Ok(ReplicabilityTarget { kind, value })
    }

    pub fn sd_of_se(value: f64) -> Result<Self> {
        Self::new(TargetKind::SdOfSe, value)
    }

    pub fn cv_of_se(value: f64) -> Result<Self> {
        Self::new(TargetKind::CvOfSe, value)
    }

    pub fn cv_of_variance(value: f64) -> Result<Self> {
        Self::new(TargetKind::CvOfVariance, value)
    }

    pub fn df(value: f64) -> Result<Self> {
        Self::new(TargetKind::Df, value)
    }

    /// The implied CV of the pooled SE. `se` is needed only for
    /// `SdOfSe` goals.
    pub fn resolve_cv(&self, se: Option<f64>) -> Result<f64> {
        match self.kind {
            TargetKind::SdOfSe => {
                let se = se.ok_or_else(|| Error::InvalidTarget("an SD goal needs a pilot standard error".into()))?;
                cv_for_sd_goal(self.value, se)
            }
            TargetKind::CvOfSe => Ok(self.value),
            TargetKind::CvOfVariance => Ok(0.5 * self.value),
            TargetKind::Df => Ok(df_to_cv(self.value)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub m_required: usize,
    /// Pilot point estimate of the fraction of missing information.
    pub gamma_point: f64,
    /// Upper confidence bound actually plugged into the rule.
    pub gamma_used: f64,
    pub cv_target: f64,
    pub df_implied: f64,
    pub pilot_m: usize,
    pub pilot_sufficient: bool,
    /// True when the rule asked for more than the cap.
    pub capped: bool,
}

/// Plug-in CV target: an SD goal for the SE divided by the pilot SE.
pub fn cv_for_sd_goal(sd_goal: f64, se_pilot: f64) -> Result<f64> {
    if !(sd_goal > 0.0 && sd_goal.is_finite()) || !(se_pilot > 0.0 && se_pilot.is_finite()) {
        return Err(Error::InvalidTarget(format!(
            "SD goal and pilot SE must be positive and finite, got {sd_goal} and {se_pilot}"
        )));
    }
    Ok(sd_goal / se_pilot)
}

pub fn cv_to_df(cv: f64) -> Result<f64> {
    if !(cv > 0.0 && cv < 1.0) {
        return Err(Error::Domain(format!("cv must lie in (0, 1), got {cv}")));
    }
    Ok(df_from_cv(cv))
}

pub fn df_to_cv(df: f64) -> f64 {
    (1.0 / (2.0 * df)).sqrt()
}

/// Checked form of [`df_to_cv`].
pub fn df_to_cv_checked(df: f64) -> Result<f64> {
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::Domain(format!("df must be positive, got {df}")));
    }
    Ok(df_to_cv(df))
}

fn df_from_cv(cv: f64) -> f64 {
    1.0 / (2.0 * cv * cv)
}

/// Variance and SE inflation of a point estimate from `m` imputations,
/// relative to infinitely many.
pub fn variance_inflation(gamma: f64, m: usize) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if m < 1 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let v = 1.0 + gamma / m as f64;
    Ok((v, v.sqrt()))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_cv(cv: f64) -> Result<()> {
    if !(cv > 0.0 && cv < 1.0) {
        return Err(Error::Domain(format!("cv must lie in (0, 1), got {cv}")));
    }
    Ok(())
}

/// Ceiling that ignores floating-point dust just above an integer, so that
/// algebraically equal routes through the rules land on the same count.
fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Rule evaluation with its floor and cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Planner {
    pub m_max: usize,
}

impl Default for Planner {
    fn default() -> Self {
        Planner { m_max: DEFAULT_M_MAX }
    }
}

impl Planner {
    pub fn with_m_max(m_max: usize) -> Result<Self> {
        if m_max < M_MIN {
            return Err(Error::Domain(format!("m_max must be at least {M_MIN}, got {m_max}")));
        }
        Ok(Planner { m_max })
    }

    /// `(count, capped)` for `1 + df·gamma²`.
    fn rule(&self, gamma: f64, df: f64) -> (usize, bool) {
        let raw = snap_ceil(1.0 + df * gamma * gamma);
        if raw > self.m_max as f64 {
            log::warn!("quadratic rule asks for {raw} imputations; capping at {}", self.m_max);
            return (self.m_max, true);
        }
        ((raw as usize).max(M_MIN), false)
    }

    pub fn m_for_df(&self, gamma: f64, df: f64) -> Result<usize> {
        check_gamma(gamma)?;
        if !(df >= 1.0 && df.is_finite()) {
            return Err(Error::Domain(format!("df must be at least 1, got {df}")));
        }
        Ok(self.rule(gamma, df).0)
    }

    /// `ceil(1 + ½·(gamma/cv)²)` for a goal on the CV of the SE.
    pub fn m_for_se_cv(&self, gamma: f64, cv: f64) -> Result<usize> {
        check_gamma(gamma)?;
        check_cv(cv)?;
        Ok(self.rule(gamma, df_from_cv(cv)).0)
    }

    /// `ceil(1 + 2·(gamma/cv_v)²)` for a goal on the CV of the variance.
    pub fn m_for_var_cv(&self, gamma: f64, cv_v: f64) -> Result<usize> {
        check_gamma(gamma)?;
        check_cv(cv_v)?;
        Ok(self.rule(gamma, df_from_cv(0.5 * cv_v)).0)
    }

    /// Two-stage recommendation from a pilot pooling.
    pub fn recommend(&self, pilot: &PooledAnalysis, target: &ReplicabilityTarget, level: f64) -> Result<Recommendation> {
        if !(pilot.se > 0.0 && pilot.se.is_finite()) {
            return Err(Error::InvalidTarget(format!("pilot standard error must be positive, got {}", pilot.se)));
        }
        let ci = gamma_ci(pilot.gamma_hat, pilot.m, level)?;
        let cv_target = target.resolve_cv(Some(pilot.se))?;
        // an SD goal at or above the pilot SE gives cv >= 1; the rule still
        // applies and lands on the floor
        let (m_required, capped) = self.rule(ci.upper, df_from_cv(cv_target));
        Ok(Recommendation {
            m_required,
            gamma_point: pilot.gamma_hat,
            gamma_used: ci.upper,
            cv_target,
            df_implied: df_from_cv(cv_target),
            pilot_m: pilot.m,
            pilot_sufficient: pilot.m >= m_required,
            capped,
        })
    }
}

pub fn m_for_se_cv(gamma: f64, cv: f64) -> Result<usize> {
    Planner::default().m_for_se_cv(gamma, cv)
}

pub fn m_for_var_cv(gamma: f64, cv_v: f64) -> Result<usize> {
    Planner::default().m_for_var_cv(gamma, cv_v)
}

pub fn m_for_df(gamma: f64, df: f64) -> Result<usize> {
    Planner::default().m_for_df(gamma, df)
}

pub fn recommend(pilot: &PooledAnalysis, target: &ReplicabilityTarget, level: f64) -> Result<Recommendation> {
    Planner::default().recommend(pilot, target, level)
}

/// The older linear rule, `ceil(100·gamma)`.
pub fn m_linear(gamma: f64) -> usize {
    (snap_ceil(100.0 * gamma) as usize).max(1)
}
