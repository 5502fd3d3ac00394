//! Multiple-imputation toolkit: pool per-imputation analyses with Rubin's
//! rules, put a confidence interval on the fraction of missing information,
//! and work out how many imputations are needed for standard errors that
//! stay put when the data are imputed again.
//!
//! The [`montecarlo`] module checks the planning rules against simulated
//! incomplete data imputed by [`imputer`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod fmi;
pub mod imputer;
pub mod montecarlo;
pub mod planner;
pub mod pool;
pub mod report;

pub use error::{Error, Result};
pub use fmi::{gamma_ci, inv_logit, logit, table1, GammaInterval};
pub use imputer::{analyze_mean, fit_and_draw, impute_m, impute_once, CompletedDataset, IncompleteBivariate, PosteriorDraw};
pub use planner::{Planner, Recommendation, ReplicabilityTarget, TargetKind};
pub use pool::{pool, ImputationResult, PooledAnalysis};

/// Lower clamp applied to the fraction of missing information before any
/// logit-scale work; the upper clamp is `1 - GAMMA_EPS`.
pub const GAMMA_EPS: f64 = 1e-6;

/// Default confidence level used throughout.
pub const DEFAULT_LEVEL: f64 = 0.95;
