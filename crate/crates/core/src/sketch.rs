//! The sketched product and its baselines.
//!
//! [`sketch_multiply`] rotates both inputs, computes the sampled entries of
//! the rotated product and rotates the partial result back:
//!
//! ```text
//! A' = W_{a,g}(A),  B' = W_{g,b}(B)
//! C'_ij = A'_i: . B'_:j  for (i, j) in the index set, 0 elsewhere
//! C = W^{-1}_{a,b}(C')            (times n/r when unbiased)
//! ```
//!
//! Total work is `O(n^2 (r + log n))`. The biased estimate has mean
//! `(r/n) AB` and expected squared error `(1 - r/n) ||AB||_F^2`; the unbiased
//! one has mean `AB` and expected squared error `(n/r - 1) ||AB||_F^2`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{AmmError, Result};
use crate::matrix::{Matrix, Seed, SeedStream, SignVector};
use crate::rotation::{rotate, rotate_inverse, RotationKeys};
use crate::sampling::{sample_indices, IndexSet, SamplerMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Mean `(r/n) AB`.
    Biased,
    /// Rescaled by `n/r`, mean `AB`.
    Unbiased,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Biased => "biased",
            Estimator::Unbiased => "unbiased",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "biased" => Ok(Estimator::Biased),
            "unbiased" => Ok(Estimator::Unbiased),
            other => Err(format!("unknown estimator '{other}'")),
        }
    }
}

/// Everything that determines a sketch, including its randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub n: usize,
    pub r: usize,
    pub estimator: Estimator,
    pub sampler: SamplerMode,
    pub seed: Seed,
    /// Apply the middle key `gamma`. It cancels in the product, so turning it
    /// off changes rounding but not the output distribution.
    pub apply_gamma: bool,
}

impl SketchConfig {
    pub fn new(n: usize, r: usize) -> Self {
        Self {
            n,
            r,
            estimator: Estimator::Biased,
            sampler: SamplerMode::UniformRandom,
            seed: Seed(0),
            apply_gamma: true,
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_sampler(mut self, sampler: SamplerMode) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_seed(mut self, seed: impl Into<Seed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(AmmError::NotPowerOfTwo(self.n));
        }
        if self.r < 1 || self.r > self.n {
            return Err(AmmError::InvalidConfig(format!("r = {} must satisfy 1 <= r <= n = {}", self.r, self.n)));
        }
        if self.sampler == SamplerMode::All && self.r != self.n {
            return Err(AmmError::InvalidConfig(format!(
                "sampler 'all' requires r = n, got r = {}, n = {}",
                self.r, self.n
            )));
        }
        Ok(())
    }

    /// `n / r` for the unbiased estimator, 1 otherwise.
    pub fn output_scale(&self) -> f64 {
        match self.estimator {
            Estimator::Biased => 1.0,
            Estimator::Unbiased => self.n as f64 / self.r as f64,
        }
    }

    fn check_inputs(&self, a: &Matrix, b: &Matrix) -> Result<()> {
        self.validate()?;
        for m in [a, b] {
            if m.n() != self.n {
                return Err(AmmError::DimensionMismatch { expected: self.n, actual: m.n() });
            }
        }
        Ok(())
    }
}

/// Wall-clock time spent in each phase of one call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub rotate: Duration,
    pub partial_product: Duration,
    pub inverse: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.rotate + self.partial_product + self.inverse
    }
}

#[derive(Clone, Debug)]
pub struct SketchResult {
    pub estimate: Matrix,
    /// `None` for the naive baseline, which does not rotate.
    pub keys: Option<RotationKeys>,
    pub indices: IndexSet,
    pub timings: PhaseTimings,
}

/// Classical `O(n^3)` product; the ground truth for every comparison.
pub fn exact_multiply(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// Dot product with eight independent accumulators combined in a fixed
/// order, so results do not depend on the caller.
#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let xs = x.chunks_exact(8);
    let ys = y.chunks_exact(8);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (cx, cy) in xs.zip(ys) {
        for k in 0..8 {
            acc[k] += cx[k] * cy[k];
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Fills the positions in `idx` with `row_i(a) . col_j(b)`, zero elsewhere.
///
/// `b_t` must be the transpose of the right factor so both operands of each
/// dot product are contiguous.
fn sampled_entries(a: &Matrix, b_t: &Matrix, idx: &IndexSet) -> Matrix {
    let n = a.n();
    let mut out = vec![0.0; n * n];
    for (row, positions) in idx.rows() {
        let a_row = a.row(row);
        for &p in positions {
            out[p] = dot(a_row, b_t.row(p % n));
        }
    }
    Matrix::from_raw(n, out)
}

/// Dense `n x n` matrix holding `(A' B')_{ij}` at every position of `idx`
/// and zero elsewhere.
pub fn partial_product(aprime: &Matrix, bprime: &Matrix, idx: &IndexSet) -> Result<Matrix> {
    aprime.check_same(bprime)?;
    if idx.n() != aprime.n() {
        return Err(AmmError::DimensionMismatch { expected: aprime.n(), actual: idx.n() });
    }
    Ok(sampled_entries(aprime, &bprime.transpose(), idx))
}

/// Sketched product with the randomness drawn from `cfg.seed`.
pub fn sketch_multiply(a: &Matrix, b: &Matrix, cfg: &SketchConfig) -> Result<SketchResult> {
    sketch_multiply_from(a, b, cfg, &mut SeedStream::new(cfg.seed))
}

/// Sketched product drawing from a caller-supplied stream (ignores
/// `cfg.seed`). Draw order: `alpha`, `beta`, `gamma`, then the index set.
pub fn sketch_multiply_from(a: &Matrix, b: &Matrix, cfg: &SketchConfig, stream: &mut SeedStream) -> Result<SketchResult> {
    cfg.check_inputs(a, b)?;
    let keys = RotationKeys::draw(cfg.n, stream)?;
    let indices = sample_indices(cfg.sampler, cfg.n, cfg.r, stream)?;

    let start = Instant::now();
    let ones;
    let gamma = if cfg.apply_gamma {
        &keys.gamma
    } else {
        ones = SignVector::ones(cfg.n);
        &ones
    };
    let aprime = rotate(a, &keys.alpha, gamma)?;
    let bprime = rotate(b, gamma, &keys.beta)?;
    let t_rotate = start.elapsed();

    let start = Instant::now();
    let cprime = partial_product(&aprime, &bprime, &indices)?;
    let t_partial = start.elapsed();

    let start = Instant::now();
    let mut estimate = rotate_inverse(&cprime, &keys.alpha, &keys.beta)?;
    if cfg.estimator == Estimator::Unbiased {
        estimate = estimate.scaled(cfg.output_scale());
    }
    let t_inverse = start.elapsed();

    Ok(SketchResult {
        estimate,
        keys: Some(keys),
        indices,
        timings: PhaseTimings { rotate: t_rotate, partial_product: t_partial, inverse: t_inverse },
    })
}

/// Baseline: computes `rn` sampled entries of `AB` directly, no rotation.
pub fn naive_sample_multiply(a: &Matrix, b: &Matrix, cfg: &SketchConfig) -> Result<SketchResult> {
    naive_sample_multiply_from(a, b, cfg, &mut SeedStream::new(cfg.seed))
}

pub fn naive_sample_multiply_from(
    a: &Matrix,
    b: &Matrix,
    cfg: &SketchConfig,
    stream: &mut SeedStream,
) -> Result<SketchResult> {
    cfg.check_inputs(a, b)?;
    let indices = sample_indices(cfg.sampler, cfg.n, cfg.r, stream)?;

    let start = Instant::now();
    let mut estimate = sampled_entries(a, &b.transpose(), &indices);
    if cfg.estimator == Estimator::Unbiased {
        estimate = estimate.scaled(cfg.output_scale());
    }
    let t_partial = start.elapsed();

    Ok(SketchResult {
        estimate,
        keys: None,
        indices,
        timings: PhaseTimings { partial_product: t_partial, ..PhaseTimings::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm_sq, generate, GeneratorKind};

    fn gaussian(n: usize, seed: u64) -> Matrix {
        generate(GeneratorKind::Gaussian, n, &mut SeedStream::new(Seed(seed))).unwrap()
    }

    fn rel_err(x: &Matrix, truth: &Matrix) -> f64 {
        (x.dist_sq(truth).unwrap() / frobenius_norm_sq(truth)).sqrt()
    }

    #[test]
    fn exact_multiply_examples() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let expected = Matrix::from_rows(&[&[19.0, 22.0], &[43.0, 50.0]]).unwrap();
        assert_eq!(exact_multiply(&a, &b).unwrap(), expected);
        assert_eq!(exact_multiply(&Matrix::identity(2), &b).unwrap(), b);
        assert_eq!(exact_multiply(&a, &Matrix::identity(2)).unwrap(), a);
        assert!(exact_multiply(&a, &Matrix::zeros(4)).is_err());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let x: Vec<f64> = (0..19).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = (0..19).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((dot(&x, &y) - naive).abs() < 1e-12);
    }

    #[test]
    fn full_sampling_recovers_the_product() {
        let n = 64;
        let (a, b) = (gaussian(n, 1), gaussian(n, 2));
        let truth = exact_multiply(&a, &b).unwrap();
        for estimator in [Estimator::Biased, Estimator::Unbiased] {
            for sampler in [SamplerMode::All, SamplerMode::UniformRandom, SamplerMode::FirstRows] {
                let cfg = SketchConfig::new(n, n).with_estimator(estimator).with_sampler(sampler).with_seed(3);
                let c = sketch_multiply(&a, &b, &cfg).unwrap().estimate;
                assert!(rel_err(&c, &truth) < 1e-9);
                let naive = naive_sample_multiply(&a, &b, &cfg).unwrap().estimate;
                assert!(rel_err(&naive, &truth) < 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let n = 16;
        let cfg = SketchConfig::new(n, 4).with_seed(9);
        let z = Matrix::zeros(n);
        assert_eq!(sketch_multiply(&z, &gaussian(n, 1), &cfg).unwrap().estimate, z);
        assert_eq!(naive_sample_multiply(&z, &z, &cfg).unwrap().estimate, z);
    }

    #[test]
    fn partial_product_fills_only_sampled_positions() {
        let n = 8;
        let (a, b) = (gaussian(n, 4), gaussian(n, 5));
        let truth = exact_multiply(&a, &b).unwrap();
        let idx = sample_indices(SamplerMode::UniformRandom, n, 3, &mut SeedStream::new(Seed(6))).unwrap();
        let p = partial_product(&a, &b, &idx).unwrap();
        for i in 0..n {
            for j in 0..n {
                if idx.contains(i, j) {
                    assert!((p.get(i, j) - truth.get(i, j)).abs() < 1e-12);
                } else {
                    assert_eq!(p.get(i, j), 0.0);
                }
            }
        }

        let all = sample_indices(SamplerMode::All, n, n, &mut SeedStream::new(Seed(0))).unwrap();
        assert!(rel_err(&partial_product(&a, &b, &all).unwrap(), &truth) < 1e-10);

        let idx = sample_indices(SamplerMode::FirstRows, 2, 1, &mut SeedStream::new(Seed(0))).unwrap();
        let p = partial_product(&Matrix::identity(2), &Matrix::identity(2), &idx).unwrap();
        assert_eq!(p.row(1), &[0.0, 0.0]);
        assert_eq!(p.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = gaussian(8, 1);
        assert!(sketch_multiply(&a, &a, &SketchConfig::new(8, 0)).is_err());
        assert!(sketch_multiply(&a, &a, &SketchConfig::new(8, 9)).is_err());
        assert!(sketch_multiply(&a, &a, &SketchConfig::new(16, 4)).is_err());
        assert!(sketch_multiply(&a, &a, &SketchConfig::new(8, 4).with_sampler(SamplerMode::All)).is_err());
        let idx = sample_indices(SamplerMode::All, 4, 4, &mut SeedStream::new(Seed(0))).unwrap();
        assert!(partial_product(&a, &a, &idx).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let n = 32;
        let (a, b) = (gaussian(n, 1), gaussian(n, 2));
        let cfg = SketchConfig::new(n, 4).with_seed(77);
        let x = sketch_multiply(&a, &b, &cfg).unwrap();
        let y = sketch_multiply(&a, &b, &cfg).unwrap();
        assert_eq!(x.estimate, y.estimate);
        assert_eq!(x.keys, y.keys);
        assert_eq!(x.indices, y.indices);
    }

    #[test]
    fn gamma_does_not_change_the_estimate() {
        let n = 32;
        let (a, b) = (gaussian(n, 1), gaussian(n, 2));
        let cfg = SketchConfig::new(n, 8).with_seed(5);
        let with = sketch_multiply(&a, &b, &cfg).unwrap().estimate;
        let without = sketch_multiply(&a, &b, &SketchConfig { apply_gamma: false, ..cfg }).unwrap().estimate;
        assert!(with.max_abs_diff(&without).unwrap() < 1e-10);
    }
}
