//! Monte Carlo measurement of the estimators against their closed forms.
//!
//! A plan fixes the inputs (generator and matrix seed), the algorithm, the
//! sketch configuration and the trial count. Trial `t` draws its randomness
//! from ChaCha stream `t` of the plan seed, so any trial can be replayed on
//! its own. Trials are grouped into fixed chunks of [`CHUNK_TRIALS`]; each
//! chunk is accumulated serially and chunks are merged in index order, which
//! makes every statistic independent of the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AmmError, Result};
use crate::matrix::{frobenius_norm_sq, generate, generate_padded, GeneratorKind, Matrix, Seed, SeedStream};
use crate::rotation::{rotate, RotationKeys};
use crate::sketch::{exact_multiply, naive_sample_multiply_from, sketch_multiply_from, Estimator, PhaseTimings, SketchConfig};
use crate::stats::{EntryStats, RunningStats};

/// Largest side length for which the cubic exact oracle is run.
pub const MAX_ORACLE_N: usize = 1024;
/// Largest side length accepted by [`flatness_probe`].
pub const MAX_FLATNESS_N: usize = 256;
pub const CHUNK_TRIALS: usize = 32;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    WhtSketch,
    NaiveSample,
    Exact,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::WhtSketch => "wht-sketch",
            Algorithm::NaiveSample => "naive-sample",
            Algorithm::Exact => "exact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wht-sketch" => Ok(Algorithm::WhtSketch),
            "naive-sample" => Ok(Algorithm::NaiveSample),
            "exact" => Ok(Algorithm::Exact),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub generator: GeneratorKind,
    pub matrix_seed: Seed,
    /// Side length of the generated block when it is smaller than
    /// `sketch.n`; the rest is zero padding.
    pub logical_n: Option<usize>,
    pub algorithm: Algorithm,
    /// `sketch.seed` is the base seed of the per-trial streams.
    pub sketch: SketchConfig,
    pub trials: usize,
    /// Track the per-entry second moment of the rotated product.
    pub track_flatness: bool,
    /// Run on the calling thread only.
    pub strict_serial: bool,
}

impl ExperimentPlan {
    pub fn new(generator: GeneratorKind, algorithm: Algorithm, sketch: SketchConfig, trials: usize) -> Self {
        Self {
            generator,
            matrix_seed: Seed(0),
            logical_n: None,
            algorithm,
            sketch,
            trials,
            track_flatness: true,
            strict_serial: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sketch.validate()?;
        if self.trials < 1 {
            return Err(AmmError::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some(l) = self.logical_n {
            if l == 0 || l.next_power_of_two() != self.sketch.n {
                return Err(AmmError::InvalidConfig(format!(
                    "logical size {l} does not pad to n = {}",
                    self.sketch.n
                )));
            }
        }
        if self.sketch.n > MAX_ORACLE_N {
            return Err(AmmError::ResourceCap(format!(
                "n = {} exceeds the exact-oracle cap of {MAX_ORACLE_N}",
                self.sketch.n
            )));
        }
        Ok(())
    }

    /// Generates `A` then `B` from the matrix seed.
    pub fn inputs(&self) -> Result<(Matrix, Matrix)> {
        let mut stream = SeedStream::new(self.matrix_seed);
        let mut one = || match self.logical_n {
            Some(l) if l != self.sketch.n => generate_padded(self.generator, l, &mut stream),
            _ => generate(self.generator, self.sketch.n, &mut stream),
        };
        let a = one()?;
        let b = one()?;
        Ok((a, b))
    }

    /// Mean of the estimator: `(r/n) AB` for the biased sketch or baseline,
    /// `AB` otherwise.
    pub fn expected_mean(&self, product: &Matrix) -> Matrix {
        match (self.algorithm, self.sketch.estimator) {
            (Algorithm::Exact, _) | (_, Estimator::Unbiased) => product.clone(),
            (_, Estimator::Biased) => product.scaled(self.sketch.r as f64 / self.sketch.n as f64),
        }
    }

    /// Closed-form `E ||C - AB||_F^2`.
    pub fn predicted_sq_error(&self, product_norm_sq: f64) -> f64 {
        let (n, r) = (self.sketch.n as f64, self.sketch.r as f64);
        match (self.algorithm, self.sketch.estimator) {
            (Algorithm::Exact, _) => 0.0,
            (_, Estimator::Biased) => (1.0 - r / n) * product_norm_sq,
            (_, Estimator::Unbiased) => (n / r - 1.0) * product_norm_sq,
        }
    }
}

/// Aggregated Monte Carlo statistics for one plan.
///
/// Every field except the `time_*` ones is a pure function of the plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub n: usize,
    /// Side length before zero padding.
    pub n_requested: usize,
    pub r: usize,
    pub algorithm: Algorithm,
    pub estimator: Estimator,
    pub sampler: crate::sampling::SamplerMode,
    pub generator: GeneratorKind,
    pub trials: usize,
    pub seed: u64,
    pub matrix_seed: u64,
    /// `||AB||_F^2`
    pub target_norm_sq: f64,
    /// Mean over trials of `||C - AB||_F^2`.
    pub mean_sq_error: f64,
    pub mean_sq_error_std_error: f64,
    pub predicted_sq_error: f64,
    /// `mean_sq_error / ||AB||_F^2`, undefined for a zero product.
    pub relative_sq_error: Option<f64>,
    pub relative_sq_error_std_error: Option<f64>,
    /// `||mean(C) - E[C]||_F^2` with `E[C]` from the estimator mode.
    pub bias_norm_sq: f64,
    /// Largest per-entry `|mean(C_ij) - E[C_ij]|` in standard errors.
    pub bias_max_z: f64,
    /// Fraction of entries whose mean lies within 5 standard errors.
    pub bias_within_5se_fraction: f64,
    /// Sample variance of `C_ij` across trials: min, max and mean over entries.
    pub per_entry_variance_min: f64,
    pub per_entry_variance_max: f64,
    pub per_entry_variance_mean: f64,
    /// Mean of `(C_ij - (AB)_ij)^2` across trials: min, max and mean over entries.
    pub per_entry_sq_error_min: f64,
    pub per_entry_sq_error_max: f64,
    pub per_entry_sq_error_mean: f64,
    /// `predicted_sq_error / n^2`.
    pub predicted_per_entry_sq_error: f64,
    /// Max over entries of `|E[X_ij^2] - ||AB||_F^2 / n^2|` relative to
    /// `||AB||_F^2 / n^2`, where `X` is the rotated product for the sketch
    /// and `AB` itself otherwise.
    pub flatness_max_deviation: Option<f64>,
    /// Largest relative standard error among those per-entry means.
    pub flatness_max_std_error: Option<f64>,
    /// Mean wall time per trial, in seconds.
    pub time_rotate_s: f64,
    pub time_partial_product_s: f64,
    pub time_inverse_s: f64,
    pub time_total_s: f64,
}

/// Report plus the per-entry accumulators behind it.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: ErrorReport,
    pub a: Matrix,
    pub b: Matrix,
    pub product: Matrix,
    /// Per-entry mean and variance of the estimate.
    pub estimate_stats: EntryStats,
    /// Per-entry mean of `(C_ij - (AB)_ij)^2`.
    pub sq_error_stats: EntryStats,
}

struct Accumulator {
    estimate: EntryStats,
    sq_error: EntryStats,
    flat: Option<EntryStats>,
    total_sq_error: RunningStats,
    rotate: RunningStats,
    partial: RunningStats,
    inverse: RunningStats,
}

impl Accumulator {
    fn new(len: usize, flat: bool) -> Self {
        Self {
            estimate: EntryStats::new(len),
            sq_error: EntryStats::new(len),
            flat: flat.then(|| EntryStats::new(len)),
            total_sq_error: RunningStats::new(),
            rotate: RunningStats::new(),
            partial: RunningStats::new(),
            inverse: RunningStats::new(),
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.estimate.merge(&other.estimate);
        self.sq_error.merge(&other.sq_error);
        if let (Some(a), Some(b)) = (self.flat.as_mut(), other.flat.as_ref()) {
            a.merge(b);
        }
        self.total_sq_error.merge(&other.total_sq_error);
        self.rotate.merge(&other.rotate);
        self.partial.merge(&other.partial);
        self.inverse.merge(&other.inverse);
    }
}

struct Inputs<'a> {
    plan: &'a ExperimentPlan,
    a: &'a Matrix,
    b: &'a Matrix,
    product: &'a Matrix,
}

fn run_trial(inp: &Inputs<'_>, trial: usize, acc: &mut Accumulator, scratch: &mut Vec<f64>) -> Result<()> {
    let plan = inp.plan;
    let mut stream = SeedStream::substream(plan.sketch.seed, trial as u64);
    let (estimate, keys, timings) = match plan.algorithm {
        Algorithm::WhtSketch => {
            let res = sketch_multiply_from(inp.a, inp.b, &plan.sketch, &mut stream)?;
            (res.estimate, res.keys, res.timings)
        }
        Algorithm::NaiveSample => {
            let res = naive_sample_multiply_from(inp.a, inp.b, &plan.sketch, &mut stream)?;
            (res.estimate, None, res.timings)
        }
        Algorithm::Exact => {
            let start = std::time::Instant::now();
            let c = exact_multiply(inp.a, inp.b)?;
            let t = start.elapsed();
            (c, None, PhaseTimings { partial_product: t, ..PhaseTimings::default() })
        }
    };

    acc.estimate.push(estimate.as_slice());
    scratch.clear();
    scratch.extend(estimate.as_slice().iter().zip(inp.product.as_slice()).map(|(c, t)| (c - t) * (c - t)));
    acc.sq_error.push(scratch);
    acc.total_sq_error.push(scratch.iter().sum());
    acc.rotate.push(timings.rotate.as_secs_f64());
    acc.partial.push(timings.partial_product.as_secs_f64());
    acc.inverse.push(timings.inverse.as_secs_f64());

    if let Some(flat) = acc.flat.as_mut() {
        scratch.clear();
        match keys {
            // A'B' = W_{a,b}(AB) by the product law
            Some(RotationKeys { alpha, beta, .. }) => {
                let rotated = rotate(inp.product, &alpha, &beta)?;
                scratch.extend(rotated.as_slice().iter().map(|x| x * x));
            }
            None => scratch.extend(inp.product.as_slice().iter().map(|x| x * x)),
        }
        flat.push(scratch);
    }
    Ok(())
}

fn run_chunk(inp: &Inputs<'_>, chunk: usize) -> Result<Accumulator> {
    let len = inp.product.as_slice().len();
    let mut acc = Accumulator::new(len, inp.plan.track_flatness);
    let mut scratch = Vec::with_capacity(len);
    let start = chunk * CHUNK_TRIALS;
    let end = (start + CHUNK_TRIALS).min(inp.plan.trials);
    for trial in start..end {
        run_trial(inp, trial, &mut acc, &mut scratch)?;
    }
    Ok(acc)
}

/// Runs the plan and returns the report.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ErrorReport> {
    run_experiment_detailed(plan).map(|o| o.report)
}

/// Runs the plan and also returns the inputs and per-entry accumulators.
pub fn run_experiment_detailed(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let (a, b) = plan.inputs()?;
    let product = exact_multiply(&a, &b)?;
    let inp = Inputs { plan, a: &a, b: &b, product: &product };

    let chunks = plan.trials.div_ceil(CHUNK_TRIALS);
    let wave = if plan.strict_serial { 1 } else { rayon::current_num_threads().max(1) };
    let mut total = Accumulator::new(product.as_slice().len(), plan.track_flatness);
    let mut next = 0;
    while next < chunks {
        let end = (next + wave).min(chunks);
        let accs: Vec<Accumulator> = if wave == 1 {
            vec![run_chunk(&inp, next)?]
        } else {
            (next..end).into_par_iter().map(|c| run_chunk(&inp, c)).collect::<Result<_>>()?
        };
        for acc in &accs {
            total.merge(acc);
        }
        next = end;
    }

    let report = build_report(plan, &product, &total);
    Ok(ExperimentOutcome {
        report,
        a,
        b,
        product,
        estimate_stats: total.estimate,
        sq_error_stats: total.sq_error,
    })
}

fn min_max_mean(xs: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut sum, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
        count += 1;
    }
    (lo, hi, sum / count as f64)
}

/// `|mean - expected|` in standard errors. Differences at rounding level
/// count as zero so that deterministic entries do not produce infinities.
pub fn z_score(mean: f64, expected: f64, std_error: f64, scale: f64) -> f64 {
    let diff = (mean - expected).abs();
    if diff <= 1e-12 * scale {
        0.0
    } else if std_error == 0.0 {
        f64::INFINITY
    } else {
        diff / std_error
    }
}

fn build_report(plan: &ExperimentPlan, product: &Matrix, acc: &Accumulator) -> ErrorReport {
    let n = plan.sketch.n;
    let norm_sq = frobenius_norm_sq(product);
    let expected = plan.expected_mean(product);
    let scale = expected.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);

    let means = acc.estimate.means();
    let bias_norm_sq: f64 = means.iter().zip(expected.as_slice()).map(|(m, e)| (m - e) * (m - e)).sum();
    let zs: Vec<f64> = (0..means.len())
        .map(|i| z_score(means[i], expected.as_slice()[i], acc.estimate.std_error(i), scale))
        .collect();
    let bias_max_z = zs.iter().copied().fold(0.0, f64::max);
    let within = zs.iter().filter(|&&z| z <= 5.0).count() as f64 / zs.len() as f64;

    let (var_min, var_max, var_mean) = min_max_mean(acc.estimate.variances().into_iter());
    let (se_min, se_max, se_mean) = min_max_mean(acc.sq_error.means().iter().copied());

    let (flat_dev, flat_se) = match (&acc.flat, norm_sq > 0.0) {
        (Some(flat), true) => {
            let target = norm_sq / (n * n) as f64;
            let dev = flat.means().iter().map(|m| (m - target).abs() / target).fold(0.0, f64::max);
            let se = (0..flat.len()).map(|i| flat.std_error(i) / target).fold(0.0, f64::max);
            (Some(dev), Some(se))
        }
        _ => (None, None),
    };

    let predicted = plan.predicted_sq_error(norm_sq);
    let (rel, rel_se) = if norm_sq > 0.0 {
        (
            Some(acc.total_sq_error.mean() / norm_sq),
            Some(acc.total_sq_error.std_error() / norm_sq),
        )
    } else {
        (None, None)
    };

    ErrorReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n,
        n_requested: plan.logical_n.unwrap_or(n),
        r: plan.sketch.r,
        algorithm: plan.algorithm,
        estimator: plan.sketch.estimator,
        sampler: plan.sketch.sampler,
        generator: plan.generator,
        trials: plan.trials,
        seed: plan.sketch.seed.0,
        matrix_seed: plan.matrix_seed.0,
        target_norm_sq: norm_sq,
        mean_sq_error: acc.total_sq_error.mean(),
        mean_sq_error_std_error: acc.total_sq_error.std_error(),
        predicted_sq_error: predicted,
        relative_sq_error: rel,
        relative_sq_error_std_error: rel_se,
        bias_norm_sq,
        bias_max_z,
        bias_within_5se_fraction: within,
        per_entry_variance_min: var_min,
        per_entry_variance_max: var_max,
        per_entry_variance_mean: var_mean,
        per_entry_sq_error_min: se_min,
        per_entry_sq_error_max: se_max,
        per_entry_sq_error_mean: se_mean,
        predicted_per_entry_sq_error: predicted / (n * n) as f64,
        flatness_max_deviation: flat_dev,
        flatness_max_std_error: flat_se,
        time_rotate_s: acc.rotate.mean(),
        time_partial_product_s: acc.partial.mean(),
        time_inverse_s: acc.inverse.mean(),
        time_total_s: acc.rotate.mean() + acc.partial.mean() + acc.inverse.mean(),
    }
}

/// Result of [`flatness_probe`].
#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessReport {
    /// `||AB||_F^2 / n^2`, the predicted value of every `E[(A'B')_ij^2]`.
    pub expected: f64,
    /// Max over entries of `|mean - expected| / expected`.
    pub max_deviation: f64,
    /// Largest per-entry standard error relative to `expected`.
    pub max_relative_std_error: f64,
    /// Max over entries of `|mean - expected|` in standard errors.
    pub max_z: f64,
    /// Worst relative violation of `sum (A'B')_ij^2 = ||AB||_F^2` over draws.
    pub max_identity_error: f64,
    pub means: Vec<f64>,
}

/// Draws `trials` key triples, forms `A' = W_{a,g}(A)`, `B' = W_{g,b}(B)` and
/// their full product, and accumulates the per-entry mean of `(A'B')^2`.
pub fn flatness_probe(a: &Matrix, b: &Matrix, trials: usize, stream: &mut SeedStream) -> Result<FlatnessReport> {
    a.check_same(b)?;
    let n = a.n();
    if n > MAX_FLATNESS_N {
        return Err(AmmError::ResourceCap(format!("flatness probe needs n <= {MAX_FLATNESS_N}, got {n}")));
    }
    if trials < 1 {
        return Err(AmmError::InvalidConfig("trials must be at least 1".into()));
    }
    let norm_sq = frobenius_norm_sq(&exact_multiply(a, b)?);
    let expected = norm_sq / (n * n) as f64;
    let mut stats = EntryStats::new(n * n);
    let mut squares = vec![0.0; n * n];
    let mut max_identity_error = 0.0f64;
    for _ in 0..trials {
        let keys = RotationKeys::draw(n, stream)?;
        let aprime = rotate(a, &keys.alpha, &keys.gamma)?;
        let bprime = rotate(b, &keys.gamma, &keys.beta)?;
        let prod = aprime.matmul(&bprime)?;
        for (s, x) in squares.iter_mut().zip(prod.as_slice()) {
            *s = x * x;
        }
        stats.push(&squares);
        let total: f64 = squares.iter().sum();
        let err = if norm_sq > 0.0 { (total - norm_sq).abs() / norm_sq } else { total };
        max_identity_error = max_identity_error.max(err);
    }

    let denom = if expected > 0.0 { expected } else { 1.0 };
    let means = stats.means().to_vec();
    let max_deviation = means.iter().map(|m| (m - expected).abs() / denom).fold(0.0, f64::max);
    let max_relative_std_error = (0..means.len()).map(|i| stats.std_error(i) / denom).fold(0.0, f64::max);
    let max_z = (0..means.len())
        .map(|i| z_score(means[i], expected, stats.std_error(i), denom))
        .fold(0.0, f64::max);
    Ok(FlatnessReport { expected, max_deviation, max_relative_std_error, max_z, max_identity_error, means })
}
