//! Simulation harness for checking the imputation-count rules.
//!
//! Datasets are standard bivariate normal `(x, y)` with correlation `rho`
//! and each `y` deleted completely at random. Most experiments hold one
//! incomplete dataset fixed and re-impute it many times, so the
//! variability they measure is imputation variability given the observed
//! data.
//!
//! # Random streams
//!
//! Every random stream is a ChaCha8 generator keyed by `(seed, stream)`:
//! the generator is seeded with `seed` and its stream id is set to
//! `stream`. Replication `r` uses stream `r`; the incomplete dataset uses
//! [`DATA_STREAM`]. Sub-experiments get their own seed through
//! [`derive_seed`] (a SplitMix64 finaliser). Because no replication shares
//! a stream with another, results do not depend on how replications are
//! scheduled across threads.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmi::check_level;
use crate::imputer::{impute_and_analyze, IncompleteBivariate};
use crate::planner::{m_linear, Planner, Recommendation, ReplicabilityTarget, DEFAULT_M_MAX};
use crate::pool::{pool, PooledAnalysis};

pub const DEFAULT_SEED: u64 = 20_180_601;
pub const DEFAULT_N: usize = 2_000;

/// Stream id reserved for generating the incomplete dataset.
pub const DATA_STREAM: u64 = u64::MAX;
/// Stream id reserved for reference poolings (calibration, reference SE).
pub const REFERENCE_STREAM: u64 = u64::MAX - 1;

/// Imputations used when measuring a dataset's fraction of missing
/// information during calibration.
pub const CALIBRATION_M: usize = 2_000;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-experiment `k` of an experiment seeded with `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    splitmix64(seed ^ splitmix64(k))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_reps(reps: usize, need: usize) -> Result<()> {
    if reps < need {
        return Err(Error::InsufficientReplications { need, got: reps });
    }
    Ok(())
}

/// `n` cases from a standard bivariate normal with correlation `rho`, each
/// `y` independently missing with probability `missing_fraction`.
///
/// Per case the generator consumes `x`, a noise draw and a uniform, in that
/// order, so datasets from the same stream differ only through `rho`.
pub fn gen_incomplete<R: Rng + ?Sized>(n: usize, rho: f64, missing_fraction: f64, rng: &mut R) -> Result<IncompleteBivariate> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(missing_fraction > 0.0 && missing_fraction < 1.0) {
        return Err(Error::Domain(format!("missing fraction must lie in (0, 1), got {missing_fraction}")));
    }
    if (n as f64) * (1.0 - missing_fraction) < 4.0 {
        return Err(Error::Domain(format!("n = {n} leaves fewer than 4 expected complete cases")));
    }
    let resid = (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        x.push(xi);
        y.push((u >= missing_fraction).then_some(rho * xi + resid * e));
    }
    IncompleteBivariate::new(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub rho: f64,
    pub missing_fraction: f64,
    pub pilot_m: usize,
    pub target: ReplicabilityTarget,
    pub level: f64,
    pub reps: usize,
    pub seed: u64,
    pub m_max: usize,
}

impl ExperimentConfig {
    pub fn new(n: usize, rho: f64, missing_fraction: f64, pilot_m: usize, target: ReplicabilityTarget) -> Self {
        ExperimentConfig {
            n,
            rho,
            missing_fraction,
            pilot_m,
            target,
            level: crate::DEFAULT_LEVEL,
            reps: 100,
            seed: DEFAULT_SEED,
            m_max: DEFAULT_M_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.missing_fraction > 0.0 && self.missing_fraction < 1.0) {
            return Err(Error::Domain(format!("missing fraction must lie in (0, 1), got {}", self.missing_fraction)));
        }
        if (self.n as f64) * (1.0 - self.missing_fraction) < 4.0 {
            return Err(Error::Domain("n·(1 - missing fraction) must be at least 4".into()));
        }
        if self.pilot_m < 2 {
            return Err(Error::InsufficientImputations(self.pilot_m));
        }
        check_level(self.level)?;
        check_reps(self.reps, 1)?;
        Planner::with_m_max(self.m_max)?;
        Ok(())
    }

    /// The fixed incomplete dataset this configuration describes.
    pub fn dataset(&self) -> Result<IncompleteBivariate> {
        self.validate()?;
        gen_incomplete(self.n, self.rho, self.missing_fraction, &mut stream_rng(self.seed, DATA_STREAM))
    }

    fn planner(&self) -> Planner {
        Planner { m_max: self.m_max }
    }
}

/// Pool `m` fresh imputations of `data`.
pub fn pool_imputations<R: Rng + ?Sized>(data: &IncompleteBivariate, m: usize, level: f64, rng: &mut R) -> Result<PooledAnalysis> {
    pool(&impute_and_analyze(data, m, rng)?, level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStageRecord {
    pub rep_index: usize,
    pub pilot: PooledAnalysis,
    pub recommendation: Recommendation,
    pub final_analysis: PooledAnalysis,
}

/// One run of the two-stage procedure on a fixed dataset: pool a pilot,
/// get a recommendation, and re-impute from scratch if the pilot falls short.
pub fn run_two_stage<R: Rng + ?Sized>(
    data: &IncompleteBivariate,
    config: &ExperimentConfig,
    rep_index: usize,
    rng: &mut R,
) -> Result<TwoStageRecord> {
    let pilot = pool_imputations(data, config.pilot_m, config.level, rng)?;
    let recommendation = config.planner().recommend(&pilot, &config.target, config.level)?;
    let final_analysis = if recommendation.pilot_sufficient {
        pilot.clone()
    } else {
        pool_imputations(data, recommendation.m_required, config.level, rng)?
    };
    Ok(TwoStageRecord { rep_index, pilot, recommendation, final_analysis })
}

/// `config.reps` independent two-stage runs on the configuration's dataset.
pub fn run_two_stage_reps(config: &ExperimentConfig) -> Result<Vec<TwoStageRecord>> {
    let data = config.dataset()?;
    run_two_stage_reps_on(&data, config)
}

pub fn run_two_stage_reps_on(data: &IncompleteBivariate, config: &ExperimentConfig) -> Result<Vec<TwoStageRecord>> {
    config.validate()?;
    (0..config.reps)
        .into_par_iter()
        .map(|r| run_two_stage(data, config, r, &mut stream_rng(config.seed, r as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl FieldSummary {
    /// Sample mean, SD with divisor `n - 1`, min and max. Needs two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // the mean can land a rounding step outside a constant column
        let mean = (values.iter().sum::<f64>() / n).clamp(min, max);
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        FieldSummary { mean, sd, min, max }
    }

    pub fn cv(&self) -> f64 {
        self.sd / self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStageSummary {
    pub reps: usize,
    pub recommended_m: FieldSummary,
    pub final_m: FieldSummary,
    pub final_estimate: FieldSummary,
    pub final_se: FieldSummary,
    pub final_df: FieldSummary,
    pub final_gamma: FieldSummary,
    /// SD of the final SEs across replications.
    pub achieved_sd_of_se: f64,
    /// Share of replications whose pilot already met the target.
    pub pilot_sufficient_share: f64,
}

pub fn summarize_two_stage(records: &[TwoStageRecord]) -> Result<TwoStageSummary> {
    check_reps(records.len(), 2)?;
    let col = |f: &dyn Fn(&TwoStageRecord) -> f64| FieldSummary::of(&records.iter().map(f).collect::<Vec<_>>());
    let final_se = col(&|r| r.final_analysis.se);
    Ok(TwoStageSummary {
        reps: records.len(),
        recommended_m: col(&|r| r.recommendation.m_required as f64),
        final_m: col(&|r| r.final_analysis.m as f64),
        final_estimate: col(&|r| r.final_analysis.theta),
        final_se,
        final_df: col(&|r| r.final_analysis.df_hat),
        final_gamma: col(&|r| r.final_analysis.gamma_hat),
        achieved_sd_of_se: final_se.sd,
        pilot_sufficient_share: records.iter().filter(|r| r.recommendation.pilot_sufficient).count() as f64 / records.len() as f64,
    })
}

/// Flat per-replication row for CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageRow {
    pub rep: usize,
    pub pilot_m: usize,
    pub pilot_estimate: f64,
    pub pilot_se: f64,
    pub pilot_df: f64,
    pub pilot_gamma: f64,
    pub pilot_gamma_lower: f64,
    pub pilot_gamma_upper: f64,
    pub cv_target: f64,
    pub m_required: usize,
    pub final_m: usize,
    pub final_estimate: f64,
    pub final_se: f64,
    pub final_df: f64,
    pub final_gamma: f64,
}

impl TwoStageRow {
    pub const HEADER: [&'static str; 15] = [
        "rep",
        "pilot_m",
        "pilot_estimate",
        "pilot_se",
        "pilot_df",
        "pilot_gamma",
        "pilot_gamma_lower",
        "pilot_gamma_upper",
        "cv_target",
        "m_required",
        "final_m",
        "final_estimate",
        "final_se",
        "final_df",
        "final_gamma",
    ];

    pub fn values(&self) -> Vec<f64> {
        vec![
            self.rep as f64,
            self.pilot_m as f64,
            self.pilot_estimate,
            self.pilot_se,
            self.pilot_df,
            self.pilot_gamma,
            self.pilot_gamma_lower,
            self.pilot_gamma_upper,
            self.cv_target,
            self.m_required as f64,
            self.final_m as f64,
            self.final_estimate,
            self.final_se,
            self.final_df,
            self.final_gamma,
        ]
    }
}

impl From<&TwoStageRecord> for TwoStageRow {
    fn from(r: &TwoStageRecord) -> Self {
        TwoStageRow {
            rep: r.rep_index,
            pilot_m: r.pilot.m,
            pilot_estimate: r.pilot.theta,
            pilot_se: r.pilot.se,
            pilot_df: r.pilot.df_hat,
            pilot_gamma: r.pilot.gamma_hat,
            pilot_gamma_lower: r.pilot.gamma_interval.lower,
            pilot_gamma_upper: r.pilot.gamma_interval.upper,
            cv_target: r.recommendation.cv_target,
            m_required: r.recommendation.m_required,
            final_m: r.final_analysis.m,
            final_estimate: r.final_analysis.theta,
            final_se: r.final_analysis.se,
            final_df: r.final_analysis.df_hat,
            final_gamma: r.final_analysis.gamma_hat,
        }
    }
}

/// `reps` independent poolings of `m` imputations each, on fixed data.
pub fn replicate_poolings(data: &IncompleteBivariate, m: usize, reps: usize, level: f64, seed: u64) -> Result<Vec<PooledAnalysis>> {
    (0..reps)
        .into_par_iter()
        .map(|r| pool_imputations(data, m, level, &mut stream_rng(seed, r as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCv {
    pub m: usize,
    pub reps: usize,
    /// CV of the pooled variance across re-imputations.
    pub cv_v: f64,
    /// CV of the pooled SE across re-imputations.
    pub cv_se: f64,
    pub mean_gamma_hat: f64,
}

impl EmpiricalCv {
    /// `gamma·sqrt(2/(m-1))` at the measured mean fraction of missing information.
    pub fn predicted_cv_v(&self) -> f64 {
        self.mean_gamma_hat * (2.0 / (self.m as f64 - 1.0)).sqrt()
    }

    pub fn from_poolings(m: usize, poolings: &[PooledAnalysis]) -> Self {
        let v: Vec<f64> = poolings.iter().map(|p| p.v_total).collect();
        let se: Vec<f64> = poolings.iter().map(|p| p.se).collect();
        let mean_gamma_hat = poolings.iter().map(|p| p.gamma_hat).sum::<f64>() / poolings.len() as f64;
        EmpiricalCv {
            m,
            reps: poolings.len(),
            cv_v: FieldSummary::of(&v).cv(),
            cv_se: FieldSummary::of(&se).cv(),
            mean_gamma_hat,
        }
    }
}

/// Coefficients of variation of the pooled variance and SE when `data` is
/// re-imputed `reps` times with `m` imputations.
pub fn empirical_cv(data: &IncompleteBivariate, m: usize, reps: usize, seed: u64) -> Result<EmpiricalCv> {
    check_reps(reps, 100)?;
    let poolings = replicate_poolings(data, m, reps, crate::DEFAULT_LEVEL, seed)?;
    Ok(EmpiricalCv::from_poolings(m, &poolings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchSpec {
    pub m_lo: usize,
    pub m_hi: usize,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequiredM {
    pub m: usize,
    /// CV of the SE at `m` from the confirmation probe.
    pub cv_se: f64,
    pub probes: Vec<(usize, f64)>,
}

const CONFIRM_SALT: u64 = 0xC0FF_EE00_D15E_A5E5;

/// Smallest `m` in `[m_lo, m_hi]` whose empirical CV of the SE is at most
/// `cv_target`, by bisection assuming the CV falls as `m` grows.
///
/// Each probe at a given `m` always uses the same stream, derived from
/// `seed` and `m`. The bisection result is re-checked on a fresh stream and
/// stepped upward (by 5%) until the check passes.
pub fn required_m(data: &IncompleteBivariate, cv_target: f64, search: SearchSpec, seed: u64) -> Result<RequiredM> {
    if !(cv_target > 0.0 && cv_target < 1.0) {
        return Err(Error::Domain(format!("cv target must lie in (0, 1), got {cv_target}")));
    }
    if search.m_lo < 2 || search.m_lo >= search.m_hi {
        return Err(Error::Domain(format!("need 2 <= m_lo < m_hi, got [{}, {}]", search.m_lo, search.m_hi)));
    }
    check_reps(search.reps, 100)?;

    let mut probes = Vec::new();
    let mut probe = |m: usize, salt: u64| -> Result<f64> {
        let cv = empirical_cv(data, m, search.reps, derive_seed(seed ^ salt, m as u64))?.cv_se;
        probes.push((m, cv));
        Ok(cv)
    };

    let cv_hi = probe(search.m_hi, 0)?;
    if cv_hi > cv_target {
        return Err(Error::SearchExhausted { m_hi: search.m_hi, best: cv_hi, target: cv_target });
    }
    let (mut lo, mut hi) = (search.m_lo, search.m_hi);
    if probe(lo, 0)? <= cv_target {
        hi = lo;
    } else {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if probe(mid, 0)? <= cv_target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    let mut m = hi;
    loop {
        let cv = probe(m, CONFIRM_SALT)?;
        if cv <= cv_target {
            return Ok(RequiredM { m, cv_se: cv, probes });
        }
        if m >= search.m_hi {
            return Err(Error::SearchExhausted { m_hi: search.m_hi, best: cv, target: cv_target });
        }
        m = (m + (m / 20).max(1)).min(search.m_hi);
    }
}

/// Share of `reps` pilot poolings (with `config.pilot_m` imputations each)
/// whose estimated df exceeds `df_threshold`.
pub fn df_reliability(config: &ExperimentConfig, df_threshold: f64, reps: usize) -> Result<f64> {
    check_reps(reps, 100)?;
    let data = config.dataset()?;
    let poolings = replicate_poolings(&data, config.pilot_m, reps, config.level, config.seed)?;
    Ok(poolings.iter().filter(|p| p.df_hat > df_threshold).count() as f64 / reps as f64)
}

/// Per-replication row shared by the cv-check and df-reliability outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolingRow {
    pub rep: usize,
    pub m: usize,
    pub estimate: f64,
    pub v_total: f64,
    pub se: f64,
    pub gamma_hat: f64,
    pub df_hat: f64,
}

impl PoolingRow {
    pub const HEADER: [&'static str; 7] = ["rep", "m", "estimate", "v_total", "se", "gamma_hat", "df_hat"];

    pub fn new(rep: usize, p: &PooledAnalysis) -> Self {
        PoolingRow { rep, m: p.m, estimate: p.theta, v_total: p.v_total, se: p.se, gamma_hat: p.gamma_hat, df_hat: p.df_hat }
    }

    pub fn values(&self) -> Vec<f64> {
        vec![self.rep as f64, self.m as f64, self.estimate, self.v_total, self.se, self.gamma_hat, self.df_hat]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub n: usize,
    pub missing_fraction: f64,
    pub target_gamma: f64,
    pub seed: u64,
    pub rho: f64,
    /// Fraction of missing information measured at `rho` with
    /// [`CALIBRATION_M`] imputations.
    pub gamma: f64,
}

type CalibrationKey = (usize, u64, u64, u64);

fn calibration_cache() -> &'static Mutex<HashMap<CalibrationKey, Calibration>> {
    static CACHE: OnceLock<Mutex<HashMap<CalibrationKey, Calibration>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Fraction of missing information of the seed's dataset at a given `rho`,
/// from one large pooling on the reference stream.
pub fn measure_gamma(n: usize, rho: f64, missing_fraction: f64, seed: u64) -> Result<f64> {
    let data = gen_incomplete(n, rho, missing_fraction, &mut stream_rng(seed, DATA_STREAM))?;
    Ok(pool_imputations(&data, CALIBRATION_M, crate::DEFAULT_LEVEL, &mut stream_rng(seed, REFERENCE_STREAM))?.gamma_hat)
}

/// Sweep of `rho` against measured fraction of missing information.
pub fn gamma_sweep(n: usize, missing_fraction: f64, rhos: &[f64], seed: u64) -> Result<Vec<(f64, f64)>> {
    rhos.iter().map(|&rho| Ok((rho, measure_gamma(n, rho, missing_fraction, seed)?))).collect()
}

/// Find the `rho` at which the seed's dataset has fraction of missing
/// information `target_gamma`, by bisection on `rho` in `[0, 0.99]`.
/// Results are cached per `(n, missing_fraction, target_gamma, seed)`.
pub fn calibrate_rho(n: usize, missing_fraction: f64, target_gamma: f64, seed: u64) -> Result<Calibration> {
    if !(target_gamma > 0.0 && target_gamma < 1.0) {
        return Err(Error::Domain(format!("target gamma must lie in (0, 1), got {target_gamma}")));
    }
    let key = (n, missing_fraction.to_bits(), target_gamma.to_bits(), seed);
    if let Some(c) = calibration_cache().lock().expect("cache lock").get(&key) {
        return Ok(*c);
    }

    const RHO_MAX: f64 = 0.99;
    let g_lo = measure_gamma(n, 0.0, missing_fraction, seed)?;
    let g_hi = measure_gamma(n, RHO_MAX, missing_fraction, seed)?;
    if target_gamma > g_lo || target_gamma < g_hi {
        return Err(Error::Calibration(format!(
            "target {target_gamma} outside [{g_hi:.4}, {g_lo:.4}] reachable with missing fraction {missing_fraction}"
        )));
    }
    let (mut lo, mut hi) = (0.0, RHO_MAX);
    let (mut rho, mut gamma) = (0.0, g_lo);
    for _ in 0..30 {
        rho = 0.5 * (lo + hi);
        gamma = measure_gamma(n, rho, missing_fraction, seed)?;
        if (gamma - target_gamma).abs() < 1e-4 {
            break;
        }
        // gamma falls as rho rises
        if gamma > target_gamma {
            lo = rho;
        } else {
            hi = rho;
        }
    }
    let c = Calibration { n, missing_fraction, target_gamma, seed, rho, gamma };
    calibration_cache().lock().expect("cache lock").insert(key, c);
    Ok(c)
}

/// Missing fraction used for a setup aimed at `gamma`: comfortably above
/// it, so an auxiliary correlation exists that brings the information
/// loss down to the target.
pub fn default_missing_for(gamma: f64) -> f64 {
    (gamma + 0.15).min(0.95)
}

/// Calibrated dataset whose fraction of missing information is about `gamma`.
pub fn calibrated_dataset(n: usize, gamma: f64, seed: u64) -> Result<(IncompleteBivariate, Calibration)> {
    let cal = calibrate_rho(n, default_missing_for(gamma), gamma, seed)?;
    let data = gen_incomplete(n, cal.rho, cal.missing_fraction, &mut stream_rng(seed, DATA_STREAM))?;
    Ok((data, cal))
}

/// Pooled SE from a large reference pooling; used to turn a CV goal into
/// an SD goal for a specific dataset.
pub fn reference_se(data: &IncompleteBivariate, m: usize, seed: u64) -> Result<f64> {
    Ok(pool_imputations(data, m, crate::DEFAULT_LEVEL, &mut stream_rng(seed, REFERENCE_STREAM))?.se)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub gamma: f64,
    pub m_quadratic: usize,
    pub m_linear: usize,
    pub m_simulated: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSimulation {
    pub n: usize,
    pub search: SearchSpec,
    pub seed: u64,
}

/// Quadratic against linear rule over `gammas`, optionally with the
/// simulated requirement on a dataset calibrated to each gamma.
pub fn curve_data(gammas: &[f64], cv_target: f64, simulate: Option<CurveSimulation>) -> Result<Vec<CurveRow>> {
    let planner = Planner::default();
    gammas
        .iter()
        .map(|&gamma| {
            let m_quadratic = planner.m_for_se_cv(gamma, cv_target)?;
            let m_simulated = match simulate {
                None => None,
                Some(sim) => {
                    let seed = derive_seed(sim.seed, gamma.to_bits());
                    let (data, _) = calibrated_dataset(sim.n, gamma, seed)?;
                    Some(required_m(&data, cv_target, sim.search, seed)?.m)
                }
            };
            Ok(CurveRow { gamma, m_quadratic, m_linear: m_linear(gamma), m_simulated })
        })
        .collect()
}

/// Degrees of freedom implied by each CV of the SE, `1 / (2·cv²)`.
pub fn df_cv_curve(cvs: &[f64]) -> Result<Vec<(f64, f64)>> {
    cvs.iter().map(|&cv| Ok((cv, crate::planner::cv_to_df(cv)?))).collect()
}

/// Outcome of one meta-run of the conservatism check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservatismRun {
    pub seed: u64,
    pub target_sd: f64,
    pub achieved_sd_of_se: f64,
    pub mean_recommended_m: f64,
}

impl ConservatismRun {
    pub fn ratio(&self) -> f64 {
        self.achieved_sd_of_se / self.target_sd
    }
}

/// Repeat the two-stage experiment on `meta_runs` independent datasets.
/// Each dataset gets an SD goal of `cv × reference SE` and `base.reps`
/// two-stage replications; `base.target` and `base.seed` are replaced.
pub fn conservatism_runs(base: &ExperimentConfig, cv: f64, meta_runs: usize, reference_m: usize) -> Result<Vec<ConservatismRun>> {
    (0..meta_runs)
        .map(|k| {
            let seed = derive_seed(base.seed, k as u64);
            let mut cfg = ExperimentConfig { seed, ..*base };
            let data = cfg.dataset()?;
            let target_sd = cv * reference_se(&data, reference_m, seed)?;
            cfg.target = ReplicabilityTarget::sd_of_se(target_sd)?;
            let summary = summarize_two_stage(&run_two_stage_reps_on(&data, &cfg)?)?;
            Ok(ConservatismRun {
                seed,
                target_sd,
                achieved_sd_of_se: summary.achieved_sd_of_se,
                mean_recommended_m: summary.recommended_m.mean,
            })
        })
        .collect()
}
