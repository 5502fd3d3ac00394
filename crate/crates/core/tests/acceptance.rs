//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails. All tolerances are pinned below.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use howmany::fmi::table1_default;
use howmany::montecarlo::{
    calibrate_rho, calibrated_dataset, conservatism_runs, default_missing_for, df_reliability, empirical_cv,
    reference_se, required_m, run_two_stage_reps_on, summarize_two_stage, ExperimentConfig, SearchSpec,
    DEFAULT_N, DEFAULT_SEED,
};
use howmany::planner::{m_for_df, m_for_se_cv, m_for_var_cv, m_linear, recommend};
use howmany::pool::pool_slices;
use howmany::{PooledAnalysis, ReplicabilityTarget};

// C1
const TABLE_TOL: f64 = 0.005;
// C2
const POOL_REL_TOL: f64 = 1e-12;
// C4
const WORKED_GAMMA_UPPER: f64 = 0.69;
const WORKED_GAMMA_TOL: f64 = 0.005;
const WORKED_M_RANGE: (usize, usize) = (124, 128);
// C5
const CV_M: usize = 20;
const CV_REPS: usize = 2_000;
const CV_V_REL_TOL: f64 = 0.15;
const CV_SE_REL_TOL: f64 = 0.20;
// C6
const CONSERVATISM_META_RUNS: usize = 100;
const CONSERVATISM_REPS: usize = 100;
const CONSERVATISM_CV: f64 = 0.05;
const CONSERVATISM_RATIO: f64 = 1.15;
const CONSERVATISM_SHARE: f64 = 0.85;
const REFERENCE_M: usize = 500;
// C7
const CURVE_CV: f64 = 0.05;
const CURVE_SEARCH: SearchSpec = SearchSpec { m_lo: 2, m_hi: 500, reps: 400 };
const CURVE_REL_TOL: f64 = 0.20;
// C8
const DF_THRESHOLD: f64 = 100.0;
const DF_REPS: usize = 1_000;
const DF_SHARE_RANGE: (f64, f64) = (0.03, 0.50);
// C9
const ORDERING_REPS: usize = 100;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        a.abs() <= tol
    } else {
        ((a - b) / b).abs() <= tol
    }
}

fn c1_table() -> Outcome {
    let out = run(&["table1"]);
    let rows = match howmany::report::read_numeric_csv(out.stdout.as_slice()) {
        Ok((_, rows)) if out.status.success() => rows,
        _ => return outcome(false, "table1 did not produce CSV".into()),
    };
    let lib = table1_default();
    if rows.len() != PUBLISHED_TABLE.len() || lib.len() != PUBLISHED_TABLE.len() {
        return outcome(false, format!("{} rows, expected {}", rows.len(), PUBLISHED_TABLE.len()));
    }
    let mut worst: f64 = 0.0;
    let mut keys_match = true;
    for ((row, lib), &(g, m, lo, hi)) in rows.iter().zip(&lib).zip(PUBLISHED_TABLE.iter()) {
        keys_match &= row[0] == g && row[1] as usize == m && lib.point == g && lib.m == m;
        worst = worst.max((row[2] - lo).abs()).max((row[3] - hi).abs());
        worst = worst.max((lib.lower - lo).abs()).max((lib.upper - hi).abs());
    }
    outcome(keys_match && worst <= TABLE_TOL, format!("max cell error {worst:.4} (tol {TABLE_TOL})"))
}

fn c2_pool() -> Outcome {
    // (estimates, variances, expected) with t quantiles and logit CI
    // endpoints from an independent statistics package
    let t2 = 4.861472609226568;
    let t3 = 2.8409525698782963;
    let v3: f64 = 11.0 / 6.0;
    let cases: [(&[f64], &[f64], [f64; 13]); 2] = [
        (
            &[0.0, 2.0],
            &[1.0, 1.0],
            [2.0, 1.0, 1.0, 2.0, 4.0, 2.0, 0.75, 0.75, 16.0 / 9.0, 0.2970570150325101, 0.9551513479149512, 1.0 - 2.0 * t2, 1.0 + 2.0 * t2],
        ),
        (
            &[1.0, 2.0, 3.0],
            &[0.5, 0.5, 0.5],
            [
                3.0,
                2.0,
                0.5,
                1.0,
                v3,
                v3.sqrt(),
                8.0 / 11.0,
                8.0 / 11.0,
                121.0 / 32.0,
                0.34990094598687804,
                0.9296374261309596,
                2.0 - t3 * v3.sqrt(),
                2.0 + t3 * v3.sqrt(),
            ],
        ),
    ];
    let fields = |p: &PooledAnalysis| {
        [
            p.m as f64,
            p.theta,
            p.w_bar,
            p.b,
            p.v_total,
            p.se,
            p.gamma_hat,
            p.gamma_hat_raw,
            p.df_hat,
            p.gamma_interval.lower,
            p.gamma_interval.upper,
            p.theta_interval.0,
            p.theta_interval.1,
        ]
    };
    let mut worst: f64 = 0.0;
    for (est, var, expected) in cases {
        let p = match pool_slices(est, var, 0.95) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("pool failed: {e}")),
        };
        for (got, want) in fields(&p).into_iter().zip(expected) {
            worst = worst.max(((got - want) / want).abs());
        }
        worst = worst.max((p.level - 0.95).abs()).max((p.gamma_interval.point - p.gamma_hat).abs());
    }
    outcome(worst <= POOL_REL_TOL, format!("max relative error {worst:.2e} (tol {POOL_REL_TOL:.0e})"))
}

fn c3_identities() -> Outcome {
    let gammas: Vec<f64> = (1..=50).map(|i| i as f64 / 51.0).collect();
    let cvs: Vec<f64> = (1..=10).map(|j| 0.01 * j as f64 + 0.005 * (j % 3) as f64).collect();
    let mut mismatches = 0;
    for &g in &gammas {
        for &cv in &cvs {
            let se = m_for_se_cv(g, cv).unwrap();
            let df = m_for_df(g, 1.0 / (2.0 * cv * cv)).unwrap();
            let var = m_for_var_cv(g, 2.0 * cv).unwrap();
            // closed form, up to the floor at 2
            let closed = 1.0 + 0.5 * (g / cv).powi(2);
            let closed_ok = se == 2 && closed <= 2.0 + 1e-9 || (se as f64 >= closed - 1e-9 && (se as f64) < closed + 1.0);
            if se != df || se != var || !closed_ok {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{} grid points, {mismatches} mismatches", gammas.len() * cvs.len()))
}

fn c4_worked_example() -> Outcome {
    let pilot = synthetic_pilot(5, 0.39, 0.023);
    let rec = match recommend(&pilot, &ReplicabilityTarget::sd_of_se(0.001).unwrap(), 0.95) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("recommend failed: {e}")),
    };
    let gamma_ok = (rec.gamma_used - WORKED_GAMMA_UPPER).abs() <= WORKED_GAMMA_TOL;
    let m_ok = (WORKED_M_RANGE.0..=WORKED_M_RANGE.1).contains(&rec.m_required);
    outcome(
        gamma_ok && m_ok,
        format!(
            "gamma_used {:.4} (want {WORKED_GAMMA_UPPER} ± {WORKED_GAMMA_TOL}), m_required {} (want {}..={})",
            rec.gamma_used, rec.m_required, WORKED_M_RANGE.0, WORKED_M_RANGE.1
        ),
    )
}

fn c5_variance_cv() -> Outcome {
    let (data, cal) = calibrated_dataset(DEFAULT_N, 0.5, DEFAULT_SEED).unwrap();
    let cv = empirical_cv(&data, CV_M, CV_REPS, DEFAULT_SEED).unwrap();
    let predicted = cv.predicted_cv_v();
    let ok_v = rel_close(cv.cv_v, predicted, CV_V_REL_TOL);
    let ok_se = rel_close(cv.cv_v, 2.0 * cv.cv_se, CV_SE_REL_TOL);
    outcome(
        ok_v && ok_se,
        format!(
            "gamma {:.3}: CV(V) {:.4} vs predicted {:.4} (tol {CV_V_REL_TOL}); 2·CV(SE) {:.4} (tol {CV_SE_REL_TOL})",
            cal.gamma,
            cv.cv_v,
            predicted,
            2.0 * cv.cv_se
        ),
    )
}

fn setup_035(pilot_m: usize, reps: usize) -> ExperimentConfig {
    let missing = default_missing_for(0.35);
    let cal = calibrate_rho(DEFAULT_N, missing, 0.35, DEFAULT_SEED).unwrap();
    let mut cfg = ExperimentConfig::new(DEFAULT_N, cal.rho, missing, pilot_m, ReplicabilityTarget::cv_of_se(0.05).unwrap());
    cfg.reps = reps;
    cfg
}

fn c6_conservatism() -> Outcome {
    let cfg = setup_035(5, CONSERVATISM_REPS);
    let runs = match conservatism_runs(&cfg, CONSERVATISM_CV, CONSERVATISM_META_RUNS, REFERENCE_M) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("meta-runs failed: {e}")),
    };
    let ratios: Vec<f64> = runs.iter().map(|r| r.ratio()).collect();
    let share = ratios.iter().filter(|&&r| r <= CONSERVATISM_RATIO).count() as f64 / ratios.len() as f64;
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let median = {
        let mut s = ratios.clone();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    outcome(
        share >= CONSERVATISM_SHARE,
        format!(
            "{} meta-runs x {} reps: {:.0}% at or under {CONSERVATISM_RATIO}x target (need {:.0}%), median ratio {median:.3}, max {max:.3}",
            runs.len(),
            CONSERVATISM_REPS,
            100.0 * share,
            100.0 * CONSERVATISM_SHARE
        ),
    )
}

fn c7_curve() -> Outcome {
    let mut found = Vec::new();
    for g in [0.2, 0.5, 0.8] {
        let (data, _) = calibrated_dataset(DEFAULT_N, g, DEFAULT_SEED).unwrap();
        match required_m(&data, CURVE_CV, CURVE_SEARCH, DEFAULT_SEED) {
            Ok(r) => found.push(r.m),
            Err(e) => return outcome(false, format!("search at gamma {g} failed: {e}")),
        }
    }
    let predicted = m_for_se_cv(0.5, CURVE_CV).unwrap() as f64;
    let a = (found[1] as f64 - predicted).abs() <= CURVE_REL_TOL * predicted;
    let b = found[2] > m_linear(0.8);
    let c = found[0] < m_linear(0.2);
    outcome(
        a && b && c,
        format!(
            "required m at gamma .2/.5/.8 = {}/{}/{}; (a) {} within {:.0}% of {predicted}; (b) {} > {}; (c) {} < {}",
            found[0],
            found[1],
            found[2],
            found[1],
            100.0 * CURVE_REL_TOL,
            found[2],
            m_linear(0.8),
            found[0],
            m_linear(0.2)
        ),
    )
}

fn c8_df_reliability() -> Outcome {
    let missing = default_missing_for(0.39);
    let cal = calibrate_rho(DEFAULT_N, missing, 0.39, DEFAULT_SEED).unwrap();
    let cfg = ExperimentConfig::new(DEFAULT_N, cal.rho, missing, 5, ReplicabilityTarget::cv_of_se(0.05).unwrap());
    let share = df_reliability(&cfg, DF_THRESHOLD, DF_REPS).unwrap();
    outcome(
        share > DF_SHARE_RANGE.0 && share < DF_SHARE_RANGE.1,
        format!("{share:.3} of {DF_REPS} pilots report df > {DF_THRESHOLD} (want in ({}, {}))", DF_SHARE_RANGE.0, DF_SHARE_RANGE.1),
    )
}

fn c9_pilot_ordering() -> Outcome {
    let mut cfg = setup_035(5, ORDERING_REPS);
    let data = cfg.dataset().unwrap();
    cfg.target = ReplicabilityTarget::sd_of_se(CONSERVATISM_CV * reference_se(&data, REFERENCE_M, cfg.seed).unwrap()).unwrap();
    let mut summaries = Vec::new();
    for pilot_m in [5, 20] {
        cfg.pilot_m = pilot_m;
        summaries.push(summarize_two_stage(&run_two_stage_reps_on(&data, &cfg).unwrap()).unwrap().recommended_m);
    }
    let (small, large) = (summaries[0], summaries[1]);
    outcome(
        large.mean < small.mean && large.sd < small.sd,
        format!("recommended m mean/sd: pilot 5 {:.1}/{:.1}, pilot 20 {:.1}/{:.1}", small.mean, small.sd, large.mean, large.sd),
    )
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let invocations: [&[&str]; 3] = [
        &["--experiment", "two-stage", "--gamma", "0.35", "--missing", "0.5", "--reps", "40"],
        &["--experiment", "cv-check", "--rho", "0.7", "--m", "10", "--reps", "200"],
        &["--experiment", "df-reliability", "--rho", "0.7", "--reps", "200"],
    ];
    let mut identical = 0;
    for (i, args) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in [None, Some("1"), Some("3")] {
            let path = dir.path().join(format!("{i}-{}.csv", outputs.len()));
            let mut argv = vec!["simulate", "--seed", "777", "--n", "1000", "--out", path.to_str().unwrap()];
            argv.extend_from_slice(args);
            if let Some(t) = threads {
                argv.extend_from_slice(&["--threads", t]);
            }
            let out = run(&argv);
            if !out.status.success() {
                return outcome(false, format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
            }
            outputs.push((out.stdout, std::fs::read(&path).unwrap_or_default()));
        }
        if outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].1.is_empty() {
            identical += 1;
        }
    }
    outcome(identical == invocations.len(), format!("{identical}/{} simulate invocations byte-identical over 3 runs", invocations.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("C1 CI table reproduction", c1_table),
        ("C2 pooling oracle", c2_pool),
        ("C3 rule identities", c3_identities),
        ("C4 worked-example plan", c4_worked_example),
        ("C5 CV of pooled variance", c5_variance_cv),
        ("C6 two-stage conservatism", c6_conservatism),
        ("C7 required-M curve shape", c7_curve),
        ("C8 df instability", c8_df_reliability),
        ("C9 pilot-size ordering", c9_pilot_ordering),
        ("C10 determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} {name}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
