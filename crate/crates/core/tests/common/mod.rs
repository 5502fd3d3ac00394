#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use howmany::pool::pool_slices;
use howmany::report::write_pool_csv;
use howmany::{ImputationResult, PooledAnalysis};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_howmany"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

/// Per-imputation results whose pooling has exactly the requested M,
/// fraction of missing information and SE: estimates are symmetric pairs
/// around zero with sample variance B, and every W is the same.
pub fn synthetic_results(m: usize, gamma: f64, se: f64) -> Vec<ImputationResult> {
    let mf = m as f64;
    let v = se * se;
    let b = gamma * v / (1.0 + 1.0 / mf);
    let w = v - (1.0 + 1.0 / mf) * b;
    let pairs = m / 2;
    let d = (b * (mf - 1.0) / (2.0 * pairs as f64)).sqrt();
    let mut est = Vec::with_capacity(m);
    for _ in 0..pairs {
        est.push(d);
        est.push(-d);
    }
    if m % 2 == 1 {
        est.push(0.0);
    }
    est.into_iter().map(|e| ImputationResult { estimate: e, within_variance: w }).collect()
}

pub fn synthetic_pilot(m: usize, gamma: f64, se: f64) -> PooledAnalysis {
    let rs = synthetic_results(m, gamma, se);
    let est: Vec<f64> = rs.iter().map(|r| r.estimate).collect();
    let var: Vec<f64> = rs.iter().map(|r| r.within_variance).collect();
    pool_slices(&est, &var, 0.95).unwrap()
}

pub fn write_pilot(dir: &Path, name: &str, results: &[ImputationResult]) -> String {
    let path = dir.join(name);
    std::fs::write(&path, write_pool_csv(results)).unwrap();
    path.to_str().unwrap().to_string()
}

/// The 20 cells of the published 95% CI table, as (gamma, m, lower, upper).
pub const PUBLISHED_TABLE: [(f64, usize, f64, f64); 20] = [
    (0.1, 5, 0.03, 0.28),
    (0.1, 10, 0.04, 0.21),
    (0.1, 15, 0.05, 0.19),
    (0.1, 20, 0.06, 0.17),
    (0.3, 5, 0.11, 0.60),
    (0.3, 10, 0.15, 0.51),
    (0.3, 15, 0.17, 0.47),
    (0.3, 20, 0.19, 0.44),
    (0.5, 5, 0.22, 0.78),
    (0.5, 10, 0.29, 0.71),
    (0.5, 15, 0.33, 0.67),
    (0.5, 20, 0.35, 0.65),
    (0.7, 5, 0.40, 0.89),
    (0.7, 10, 0.49, 0.85),
    (0.7, 15, 0.53, 0.83),
    (0.7, 20, 0.56, 0.81),
    (0.9, 5, 0.72, 0.97),
    (0.9, 10, 0.79, 0.96),
    (0.9, 15, 0.81, 0.95),
    (0.9, 20, 0.83, 0.94),
];
