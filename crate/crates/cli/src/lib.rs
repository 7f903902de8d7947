//! Command-line front end: `amm run`, `amm sweep` and `amm amplify`.

pub mod report;

use std::io::{self, Write};
use std::path::PathBuf;

use amm_core::{
    amplify_multiply, exact_multiply, frobenius_norm_sq, run_experiment, Algorithm, AmplifyConfig, Estimator,
    ExperimentPlan, GeneratorKind, SamplerMode, Seed, SketchConfig,
};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{render_reports, to_csv, to_json, CliReport, Format, REPORT_SCHEMA_VERSION};

/// Offset between the trial seed and the default matrix seed, so the inputs
/// never share a stream with trial 0.
pub const MATRIX_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "amm", version, about = "Approximate matrix multiplication with the Walsh-Hadamard sketch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one Monte Carlo experiment and write its report.
    Run(RunArgs),
    /// Run one experiment per r value at fixed n (one report row per r).
    Sweep(SweepArgs),
    /// Amplify the sketch towards the exact product and trace the residual.
    Amplify(AmplifyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Side length; non-powers of two are zero-padded up to the next power of two.
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Input generator: gaussian, rademacher, spiky, rank-one, zero, identity.
    #[arg(long, default_value = "gaussian", value_parser = parse_generator)]
    pub generator: GeneratorKind,
    /// Index sampler: uniform-random, first-rows, all.
    #[arg(long, default_value = "uniform-random")]
    pub sampler: SamplerMode,
    /// Base seed of the sketch randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the input matrices [default: --seed plus a fixed offset].
    #[arg(long)]
    pub matrix_seed: Option<u64>,
    /// Output file [default: standard output].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Algorithm: wht-sketch, naive-sample, exact.
    #[arg(long, default_value = "wht-sketch")]
    pub algorithm: Algorithm,
    /// Estimator: biased or unbiased.
    #[arg(long, default_value = "biased")]
    pub estimator: Estimator,
    /// Number of independent trials.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Single-threaded execution [default: off].
    #[arg(long, default_value_t = false)]
    pub strict_serial: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Sampling parameter: r*n output entries are computed; 1 <= r <= n.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub r: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Comma-separated r values [default: every power of two up to n].
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub r: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct AmplifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Entries computed per round are r*n; 1 <= r <= n.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub r: u64,
    /// Target squared error relative to ||AB||_F^2, in (0, 1).
    #[arg(long, default_value_t = 1e-6)]
    pub amplify_eps: f64,
    /// Cap on the number of rounds.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iters: u64,
    /// Compute the exact product, trace the residual and stop early at the target [default: off].
    #[arg(long, default_value_t = false)]
    pub with_oracle: bool,
}

fn parse_generator(s: &str) -> Result<GeneratorKind, String> {
    GeneratorKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown generator '{s}'"))
}

/// Validated sizes shared by every subcommand.
struct Sizes {
    n: usize,
    logical_n: Option<usize>,
}

fn sizes(common: &CommonArgs) -> Result<Sizes, CliError> {
    if common.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if common.n > amm_core::evaluator::MAX_ORACLE_N {
        return Err(CliError::Usage(format!(
            "--n {} exceeds the largest supported size {}",
            common.n,
            amm_core::evaluator::MAX_ORACLE_N
        )));
    }
    let n = common.n.next_power_of_two();
    Ok(Sizes { n, logical_n: (n != common.n).then_some(common.n) })
}

fn check_r(r: u64, n: usize, sampler: SamplerMode) -> Result<usize, CliError> {
    let r = usize::try_from(r).map_err(|_| CliError::Usage(format!("--r {r} is too large")))?;
    if r > n {
        return Err(CliError::Usage(format!("--r {r} must not exceed --n (padded to {n})")));
    }
    if sampler == SamplerMode::All && r != n {
        return Err(CliError::Usage(format!("--sampler all requires --r equal to --n ({n}), got --r {r}")));
    }
    Ok(r)
}

fn matrix_seed(common: &CommonArgs) -> Seed {
    Seed(common.matrix_seed.unwrap_or(common.seed.wrapping_add(MATRIX_SEED_OFFSET)))
}

fn plan(common: &CommonArgs, exp: &ExperimentArgs, sizes: &Sizes, r: usize) -> ExperimentPlan {
    let sketch = SketchConfig::new(sizes.n, r)
        .with_estimator(exp.estimator)
        .with_sampler(common.sampler)
        .with_seed(common.seed);
    let mut plan = ExperimentPlan::new(common.generator, exp.algorithm, sketch, exp.trials as usize);
    plan.matrix_seed = matrix_seed(common);
    plan.logical_n = sizes.logical_n;
    plan.strict_serial = exp.strict_serial;
    plan
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write --output {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}"))),
    }
}

fn runtime(e: amm_core::AmmError) -> CliError {
    CliError::Runtime(e.to_string())
}

fn check_output(output: Option<&PathBuf>) -> Result<(), CliError> {
    if let Some(path) = output {
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = parent {
            if !dir.is_dir() {
                return Err(CliError::Runtime(format!("cannot write --output {}: directory does not exist", path.display())));
            }
        }
    }
    Ok(())
}

pub fn run_cmd(args: &RunArgs) -> Result<(), CliError> {
    let sizes = sizes(&args.common)?;
    let r = check_r(args.r, sizes.n, args.common.sampler)?;
    check_output(args.common.output.as_ref())?;
    let plan = plan(&args.common, &args.experiment, &sizes, r);
    let report = run_experiment(&plan).map_err(runtime)?;
    let report = CliReport::new(report, args.experiment.strict_serial);
    emit(&render_reports(&[report], args.common.format), args.common.output.as_ref())
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<(), CliError> {
    let sizes = sizes(&args.common)?;
    let rs: Vec<u64> = if args.r.is_empty() {
        std::iter::successors(Some(1u64), |r| Some(r * 2)).take_while(|&r| r as usize <= sizes.n).collect()
    } else {
        args.r.clone()
    };
    let rs = rs.into_iter().map(|r| check_r(r, sizes.n, args.common.sampler)).collect::<Result<Vec<_>, _>>()?;
    check_output(args.common.output.as_ref())?;
    let mut reports = Vec::with_capacity(rs.len());
    for r in rs {
        let plan = plan(&args.common, &args.experiment, &sizes, r);
        reports.push(CliReport::new(run_experiment(&plan).map_err(runtime)?, args.experiment.strict_serial));
    }
    let text = match args.common.format {
        // a sweep is always an array, even with one r
        Format::Json => to_json(&reports),
        Format::Csv => render_reports(&reports, Format::Csv),
    };
    emit(&text, args.common.output.as_ref())
}

/// Output of `amm amplify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifyReport {
    pub schema_version: u32,
    pub n: usize,
    pub n_requested: usize,
    pub r: usize,
    pub generator: GeneratorKind,
    pub sampler: SamplerMode,
    pub seed: u64,
    pub matrix_seed: u64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub planned_iterations: usize,
    pub iterations: usize,
    pub target_norm_sq: Option<f64>,
    pub final_sq_error: Option<f64>,
    pub final_relative_sq_error: Option<f64>,
    /// `||C_t - AB||_F^2 / ||AB||_F^2` after each round (with the oracle only).
    pub relative_residuals: Vec<f64>,
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    sq_error: f64,
    relative_sq_error: Option<f64>,
    predicted_relative_sq_error: f64,
}

pub fn amplify_cmd(args: &AmplifyArgs) -> Result<(), CliError> {
    let sizes = sizes(&args.common)?;
    let r = check_r(args.r, sizes.n, args.common.sampler)?;
    if !(args.amplify_eps > 0.0 && args.amplify_eps < 1.0) {
        return Err(CliError::Usage(format!("--amplify-eps {} must lie in (0, 1)", args.amplify_eps)));
    }
    check_output(args.common.output.as_ref())?;

    let mut stream = amm_core::SeedStream::new(matrix_seed(&args.common));
    let gen = |s: &mut amm_core::SeedStream| match sizes.logical_n {
        Some(l) => amm_core::generate_padded(args.common.generator, l, s),
        None => amm_core::generate(args.common.generator, sizes.n, s),
    };
    let a = gen(&mut stream).map_err(runtime)?;
    let b = gen(&mut stream).map_err(runtime)?;
    let truth = if args.with_oracle { Some(exact_multiply(&a, &b).map_err(runtime)?) } else { None };

    let base = SketchConfig::new(sizes.n, r).with_sampler(args.common.sampler).with_seed(args.common.seed);
    let cfg = AmplifyConfig { base, epsilon: args.amplify_eps, max_iters: args.max_iters as usize };
    let (estimate, trace) = amplify_multiply(&a, &b, &cfg, truth.as_ref()).map_err(runtime)?;

    let norm_sq = truth.as_ref().map(frobenius_norm_sq);
    let rel = |x: f64| norm_sq.filter(|&t| t > 0.0).map(|t| x / t);
    let final_sq_error = truth.as_ref().map(|t| estimate.dist_sq(t)).transpose().map_err(runtime)?;
    let report = AmplifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n: sizes.n,
        n_requested: sizes.logical_n.unwrap_or(sizes.n),
        r,
        generator: args.common.generator,
        sampler: args.common.sampler,
        seed: args.common.seed,
        matrix_seed: matrix_seed(&args.common).0,
        epsilon: args.amplify_eps,
        max_iters: cfg.max_iters,
        planned_iterations: trace.planned_iterations,
        iterations: trace.iterations,
        target_norm_sq: norm_sq,
        final_sq_error,
        final_relative_sq_error: final_sq_error.and_then(rel),
        relative_residuals: trace.residuals.iter().filter_map(|&x| rel(x)).collect(),
    };
    let text = match args.common.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let contraction = 1.0 - r as f64 / sizes.n as f64;
            let rows: Vec<TraceRow> = trace
                .residuals
                .iter()
                .enumerate()
                .map(|(i, &x)| TraceRow {
                    iteration: i + 1,
                    sq_error: x,
                    relative_sq_error: rel(x),
                    predicted_relative_sq_error: contraction.powi(i as i32 + 1),
                })
                .collect();
            to_csv(&rows)
        }
    };
    emit(&text, args.common.output.as_ref())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => run_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Amplify(args) => amplify_cmd(args),
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 for usage errors, 2 for runtime failures.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
