use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use howmany::fmi::{round2, table1, GammaInterval};
use howmany::montecarlo::{
    calibrate_rho, curve_data, df_cv_curve, df_reliability, replicate_poolings, run_two_stage_reps,
    summarize_two_stage, CurveSimulation, EmpiricalCv, ExperimentConfig, PoolingRow, SearchSpec, TwoStageRow,
    TwoStageSummary, DEFAULT_N, DEFAULT_SEED,
};
use howmany::planner::{Planner, Recommendation, ReplicabilityTarget, DEFAULT_M_MAX};
use howmany::pool::{pool, PooledAnalysis};
use howmany::report::{fmt_num, fmt_text, numeric_csv, read_pool_csv, to_json};
use howmany::{Error, Result, DEFAULT_LEVEL};

#[derive(Parser)]
#[command(name = "howmany", version, about = "Pool multiple imputations and plan how many you need")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pool per-imputation estimates with Rubin's rules
    Pool(PoolArgs),
    /// Recommend a number of imputations from a pilot analysis
    Plan(PlanArgs),
    /// Confidence intervals for the fraction of missing information
    Table1(Table1Args),
    /// Run a simulation experiment
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct PoolArgs {
    /// CSV with header `imputation,estimate,variance`
    #[arg(long = "in", value_name = "CSV")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).multiple(false)))]
struct PlanArgs {
    /// Pilot analysis, same CSV layout as `pool --in`
    #[arg(long, value_name = "CSV")]
    pilot: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    #[arg(long = "max-m", default_value_t = DEFAULT_M_MAX)]
    max_m: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct TargetArgs {
    /// Goal for the SD of the pooled SE across re-imputations
    #[arg(long = "target-sd", group = "target")]
    sd: Option<f64>,
    /// Goal for the CV of the pooled SE
    #[arg(long = "target-cv", group = "target")]
    cv: Option<f64>,
    /// Goal for the CV of the pooled variance
    #[arg(long = "target-vcv", group = "target")]
    vcv: Option<f64>,
    /// Goal for the degrees of freedom of the pooled SE
    #[arg(long = "target-df", group = "target")]
    df: Option<f64>,
}

impl TargetArgs {
    fn resolve(&self) -> Result<Option<ReplicabilityTarget>> {
        Ok(match (self.sd, self.cv, self.vcv, self.df) {
            (Some(v), ..) => Some(ReplicabilityTarget::sd_of_se(v)?),
            (_, Some(v), ..) => Some(ReplicabilityTarget::cv_of_se(v)?),
            (_, _, Some(v), _) => Some(ReplicabilityTarget::cv_of_variance(v)?),
            (_, _, _, Some(v)) => Some(ReplicabilityTarget::df(v)?),
            _ => None,
        })
    }
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5, 0.7, 0.9])]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 15, 20])]
    ms: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    TwoStage,
    CvCheck,
    Curve,
    DfReliability,
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").multiple(false)))]
struct SimulateArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    #[arg(long, default_value_t = DEFAULT_N)]
    n: usize,
    /// Correlation between the auxiliary and the incomplete variable
    #[arg(long, default_value_t = 0.68)]
    rho: f64,
    /// Calibrate `rho` so the dataset has this fraction of missing information
    #[arg(long)]
    gamma: Option<f64>,
    /// Probability that each outcome is missing
    #[arg(long, default_value_t = 0.5)]
    missing: f64,
    #[arg(long = "pilot-m", default_value_t = 5)]
    pilot_m: usize,
    #[arg(long = "target-sd", group = "target")]
    target_sd: Option<f64>,
    #[arg(long = "target-cv", group = "target")]
    target_cv: Option<f64>,
    #[arg(long = "target-df", group = "target")]
    target_df: Option<f64>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    #[arg(long = "max-m", default_value_t = DEFAULT_M_MAX)]
    max_m: usize,
    /// Imputations per pooling for `cv-check`
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// df threshold for `df-reliability`
    #[arg(long, default_value_t = 100.0)]
    threshold: f64,
    /// Gammas for `curve`
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    gammas: Vec<f64>,
    /// CV of the SE for `curve`
    #[arg(long, default_value_t = 0.05)]
    cv: f64,
    /// Add a simulated column to `curve`
    #[arg(long)]
    simulated: bool,
    /// Re-imputations per probe when simulating the curve
    #[arg(long = "search-reps", default_value_t = 400)]
    search_reps: usize,
    /// Upper end of the simulated search
    #[arg(long = "m-hi", default_value_t = 500)]
    m_hi: usize,
    /// Emit the df-versus-CV curve instead of the imputation curve
    #[arg(long = "df-curve")]
    df_curve: bool,
    /// Per-replication CSV (or the curve CSV) goes here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pool(a) => run_pool(a),
        Command::Plan(a) => run_plan(a),
        Command::Table1(a) => run_table1(a),
        Command::Simulate(a) => run_simulate(a),
    };
    match result.and_then(|out| emit(&out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: &str) -> Result<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    lock.write_all(out.as_bytes())?;
    lock.flush()?;
    Ok(())
}

fn read_results(path: &Path) -> Result<Vec<howmany::ImputationResult>> {
    let file = File::open(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    read_pool_csv(BufReader::new(file))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

/// Flat list of named values, rendered as JSON, a one-row CSV or text.
fn render_fields(fields: &[(&str, f64)], format: Format) -> String {
    match format {
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                fields.iter().map(|(k, v)| (k.to_string(), json_number(*v))).collect();
            to_json(&map) + "\n"
        }
        Format::Csv => {
            let header: Vec<&str> = fields.iter().map(|f| f.0).collect();
            numeric_csv(&header, [fields.iter().map(|f| f.1).collect()])
        }
        Format::Text => fields.iter().map(|(k, v)| format!("{k}: {}\n", fmt_text(*v))).collect(),
    }
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
}

fn pooled_fields(p: &PooledAnalysis) -> Vec<(&'static str, f64)> {
    vec![
        ("m", p.m as f64),
        ("theta", p.theta),
        ("se", p.se),
        ("w_bar", p.w_bar),
        ("b", p.b),
        ("v_total", p.v_total),
        ("gamma_hat", p.gamma_hat),
        ("gamma_hat_raw", p.gamma_hat_raw),
        ("df_hat", p.df_hat),
        ("gamma_lower", p.gamma_interval.lower),
        ("gamma_upper", p.gamma_interval.upper),
        ("theta_lower", p.theta_interval.0),
        ("theta_upper", p.theta_interval.1),
        ("level", p.level),
    ]
}

fn run_pool(a: PoolArgs) -> Result<String> {
    let p = pool(&read_results(&a.input)?, a.level)?;
    Ok(render_fields(&pooled_fields(&p), a.format))
}

fn plan_fields(pilot: &PooledAnalysis, rec: &Recommendation) -> Vec<(&'static str, f64)> {
    vec![
        ("m_required", rec.m_required as f64),
        ("gamma_point", rec.gamma_point),
        ("gamma_upper", rec.gamma_used),
        ("cv_target", rec.cv_target),
        ("df_implied", rec.df_implied),
        ("pilot_m", rec.pilot_m as f64),
        ("pilot_sufficient", if rec.pilot_sufficient { 1.0 } else { 0.0 }),
        ("pilot_estimate", pilot.theta),
        ("pilot_se", pilot.se),
    ]
}

fn run_plan(a: PlanArgs) -> Result<String> {
    let target = a.target.resolve()?.expect("clap requires one target");
    let pilot = pool(&read_results(&a.pilot)?, a.level)?;
    let rec = Planner::with_m_max(a.max_m)?.recommend(&pilot, &target, a.level)?;
    if rec.capped {
        log::warn!("recommendation capped at --max-m {}", a.max_m);
    }
    let fields = plan_fields(&pilot, &rec);
    Ok(match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct PlanJson {
                m_required: usize,
                gamma_point: f64,
                gamma_upper: f64,
                cv_target: f64,
                df_implied: f64,
                pilot_m: usize,
                pilot_sufficient: bool,
                pilot_estimate: f64,
                pilot_se: f64,
                capped: bool,
            }
            to_json(&PlanJson {
                m_required: rec.m_required,
                gamma_point: rec.gamma_point,
                gamma_upper: rec.gamma_used,
                cv_target: rec.cv_target,
                df_implied: rec.df_implied,
                pilot_m: rec.pilot_m,
                pilot_sufficient: rec.pilot_sufficient,
                pilot_estimate: pilot.theta,
                pilot_se: pilot.se,
                capped: rec.capped,
            }) + "\n"
        }
        f => render_fields(&fields, f),
    })
}

fn run_table1(a: Table1Args) -> Result<String> {
    let rows = table1(&a.gammas, &a.ms, a.level)?;
    Ok(match a.format {
        Format::Csv => numeric_csv(&["gamma", "m", "lower", "upper"], rows.iter().map(|r| vec![r.point, r.m as f64, r.lower, r.upper])),
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                gamma: f64,
                m: usize,
                lower: f64,
                upper: f64,
            }
            let rows: Vec<Row> = rows.iter().map(|r| Row { gamma: r.point, m: r.m, lower: r.lower, upper: r.upper }).collect();
            to_json(&rows) + "\n"
        }
        Format::Text => table1_text(&rows),
    })
}

fn table1_text(rows: &[GammaInterval]) -> String {
    let two = |x: f64| {
        let s = format!("{:.2}", round2(x));
        s.strip_prefix('0').map(str::to_string).unwrap_or(s)
    };
    let mut out = format!("{:>6} {:>4}  {}\n", "gamma", "m", "CI");
    for r in rows {
        out.push_str(&format!("{:>6} {:>4}  ({}, {})\n", two(r.point), r.m, two(r.lower), two(r.upper)));
    }
    out
}

#[derive(Serialize)]
struct SimulationHeader {
    experiment: &'static str,
    n: usize,
    rho: f64,
    missing_fraction: f64,
    seed: u64,
    reps: usize,
}

fn run_simulate(a: SimulateArgs) -> Result<String> {
    if let Some(threads) = a.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    let rho = match a.gamma {
        Some(g) if a.experiment != Experiment::Curve => calibrate_rho(a.n, a.missing, g, a.seed)?.rho,
        _ => a.rho,
    };
    let target = match (a.target_sd, a.target_cv, a.target_df) {
        (Some(v), ..) => ReplicabilityTarget::sd_of_se(v)?,
        (_, Some(v), _) => ReplicabilityTarget::cv_of_se(v)?,
        (_, _, Some(v)) => ReplicabilityTarget::df(v)?,
        _ => ReplicabilityTarget::cv_of_se(0.05)?,
    };
    let config = ExperimentConfig {
        n: a.n,
        rho,
        missing_fraction: a.missing,
        pilot_m: a.pilot_m,
        target,
        level: a.level,
        reps: a.reps,
        seed: a.seed,
        m_max: a.max_m,
    };
    let header = |experiment| SimulationHeader { experiment, n: a.n, rho, missing_fraction: a.missing, seed: a.seed, reps: a.reps };

    match a.experiment {
        Experiment::TwoStage => {
            let records = run_two_stage_reps(&config)?;
            let summary = summarize_two_stage(&records)?;
            if let Some(path) = &a.out {
                let rows = records.iter().map(|r| TwoStageRow::from(r).values());
                write_file(path, &numeric_csv(&TwoStageRow::HEADER, rows))?;
            }
            #[derive(Serialize)]
            struct Out {
                #[serde(flatten)]
                header: SimulationHeader,
                pilot_m: usize,
                target: ReplicabilityTarget,
                level: f64,
                summary: TwoStageSummary,
            }
            Ok(to_json(&Out { header: header("two-stage"), pilot_m: a.pilot_m, target, level: a.level, summary }) + "\n")
        }
        Experiment::CvCheck => {
            if a.reps < 100 {
                return Err(Error::InsufficientReplications { need: 100, got: a.reps });
            }
            let data = config.dataset()?;
            let poolings = replicate_poolings(&data, a.m, a.reps, a.level, a.seed)?;
            if let Some(path) = &a.out {
                let rows = poolings.iter().enumerate().map(|(i, p)| PoolingRow::new(i, p).values());
                write_file(path, &numeric_csv(&PoolingRow::HEADER, rows))?;
            }
            let cv = EmpiricalCv::from_poolings(a.m, &poolings);
            #[derive(Serialize)]
            struct Out {
                #[serde(flatten)]
                header: SimulationHeader,
                #[serde(flatten)]
                cv: EmpiricalCv,
                predicted_cv_v: f64,
            }
            Ok(to_json(&Out { header: header("cv-check"), cv, predicted_cv_v: cv.predicted_cv_v() }) + "\n")
        }
        Experiment::DfReliability => {
            let fraction = df_reliability(&config, a.threshold, a.reps)?;
            if let Some(path) = &a.out {
                let data = config.dataset()?;
                let poolings = replicate_poolings(&data, a.pilot_m, a.reps, a.level, a.seed)?;
                let rows = poolings.iter().enumerate().map(|(i, p)| PoolingRow::new(i, p).values());
                write_file(path, &numeric_csv(&PoolingRow::HEADER, rows))?;
            }
            #[derive(Serialize)]
            struct Out {
                #[serde(flatten)]
                header: SimulationHeader,
                pilot_m: usize,
                threshold: f64,
                fraction_above: f64,
            }
            Ok(to_json(&Out { header: header("df-reliability"), pilot_m: a.pilot_m, threshold: a.threshold, fraction_above: fraction }) + "\n")
        }
        Experiment::Curve => {
            let csv = if a.df_curve {
                let cvs: Vec<f64> = (1..=40).map(|i| i as f64 * 0.005).collect();
                numeric_csv(&["cv", "df"], df_cv_curve(&cvs)?.into_iter().map(|(c, d)| vec![c, d]))
            } else {
                let sim = a.simulated.then_some(CurveSimulation {
                    n: a.n,
                    search: SearchSpec { m_lo: 2, m_hi: a.m_hi, reps: a.search_reps },
                    seed: a.seed,
                });
                let mut out = String::from("gamma,m_quadratic,m_linear,m_simulated\n");
                for row in curve_data(&a.gammas, a.cv, sim)? {
                    let simulated = row.m_simulated.map(|m| m.to_string()).unwrap_or_default();
                    out.push_str(&format!("{},{},{},{}\n", fmt_num(row.gamma), row.m_quadratic, row.m_linear, simulated));
                }
                out
            };
            match &a.out {
                Some(path) => {
                    write_file(path, &csv)?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
    }
}
