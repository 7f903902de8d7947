//! Amplification of the sketch to arbitrary accuracy.
//!
//! Each round sketches the current residual `R_t = AB - C_t` with fresh keys
//! and adds the (biased, unscaled) estimate to the accumulator. The rotated
//! residual is never formed as a product: by the product law,
//! `W_{a,b}(R_t) = A'B' - W_{a,b}(C_t)`, so each sampled entry costs one dot
//! product of rotated inputs plus one lookup in the rotated accumulator.
//! The expected squared residual shrinks by `1 - r/n` per round.

use serde::{Deserialize, Serialize};

use crate::error::{AmmError, Result};
use crate::matrix::{Matrix, SeedStream, SignVector};
use crate::rotation::{rotate, rotate_inverse, RotationKeys};
use crate::sampling::sample_indices;
use crate::sketch::{dot, SketchConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifyConfig {
    /// The estimator field is ignored; every round uses the unscaled rule.
    pub base: SketchConfig,
    /// Target squared residual relative to `||AB||_F^2`.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl AmplifyConfig {
    pub fn new(base: SketchConfig, epsilon: f64) -> Self {
        Self { base, epsilon, max_iters: 10_000 }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(AmmError::InvalidConfig(format!("epsilon = {} must lie in (0, 1)", self.epsilon)));
        }
        if self.max_iters < 1 {
            return Err(AmmError::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// `ceil((n/r) ln(1/epsilon))`, capped at `max_iters`.
    pub fn planned_iterations(&self) -> usize {
        let ratio = self.base.n as f64 / self.base.r as f64;
        let planned = (ratio * (1.0 / self.epsilon).ln()).ceil().max(1.0) as usize;
        planned.min(self.max_iters)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AmplifyTrace {
    /// `||C_t - AB||_F^2` after each round; empty without ground truth.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub planned_iterations: usize,
    /// `||AB||_F^2` when ground truth was supplied.
    pub target_norm_sq: Option<f64>,
}

/// Runs the amplification loop. Without `ground_truth` it performs the
/// planned number of rounds; with it, it also records the residual after
/// each round and stops as soon as the residual is at most
/// `epsilon * ||AB||_F^2`.
pub fn amplify_multiply(
    a: &Matrix,
    b: &Matrix,
    cfg: &AmplifyConfig,
    ground_truth: Option<&Matrix>,
) -> Result<(Matrix, AmplifyTrace)> {
    cfg.validate()?;
    let base = &cfg.base;
    for m in [a, b] {
        if m.n() != base.n {
            return Err(AmmError::DimensionMismatch { expected: base.n, actual: m.n() });
        }
    }
    if let Some(t) = ground_truth {
        if t.n() != base.n {
            return Err(AmmError::DimensionMismatch { expected: base.n, actual: t.n() });
        }
    }
    let n = base.n;
    let planned = cfg.planned_iterations();
    let target_norm_sq = ground_truth.map(crate::matrix::frobenius_norm_sq);
    let mut trace = AmplifyTrace { planned_iterations: planned, target_norm_sq, ..AmplifyTrace::default() };

    let mut stream = SeedStream::new(base.seed);
    let mut acc = Matrix::zeros(n);
    let ones = SignVector::ones(n);

    for _ in 0..planned {
        let keys = RotationKeys::draw(n, &mut stream)?;
        let indices = sample_indices(base.sampler, n, base.r, &mut stream)?;
        let gamma = if base.apply_gamma { &keys.gamma } else { &ones };

        let aprime = rotate(a, &keys.alpha, gamma)?;
        let bprime_t = rotate(b, gamma, &keys.beta)?.transpose();
        let rotated_acc = rotate(&acc, &keys.alpha, &keys.beta)?;

        let mut correction = Matrix::zeros(n);
        {
            let out = correction.as_mut_slice();
            for (row, positions) in indices.rows() {
                let a_row = aprime.row(row);
                for &p in positions {
                    out[p] = dot(a_row, bprime_t.row(p % n)) - rotated_acc.as_slice()[p];
                }
            }
        }
        acc.add_assign(&rotate_inverse(&correction, &keys.alpha, &keys.beta)?);
        trace.iterations += 1;

        if let (Some(truth), Some(norm_sq)) = (ground_truth, target_norm_sq) {
            let residual = acc.dist_sq(truth)?;
            trace.residuals.push(residual);
            if residual <= cfg.epsilon * norm_sq {
                break;
            }
        }
    }
    Ok((acc, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm_sq, generate, GeneratorKind, Seed};
    use crate::sketch::exact_multiply;

    fn inputs(n: usize, seed: u64) -> (Matrix, Matrix, Matrix) {
        let mut s = SeedStream::new(Seed(seed));
        let a = generate(GeneratorKind::Gaussian, n, &mut s).unwrap();
        let b = generate(GeneratorKind::Gaussian, n, &mut s).unwrap();
        let ab = exact_multiply(&a, &b).unwrap();
        (a, b, ab)
    }

    #[test]
    fn full_rank_converges_in_one_round() {
        let n = 32;
        let (a, b, ab) = inputs(n, 1);
        let cfg = AmplifyConfig::new(SketchConfig::new(n, n).with_seed(2), 1e-6);
        let (c, trace) = amplify_multiply(&a, &b, &cfg, Some(&ab)).unwrap();
        assert_eq!(trace.iterations, 1);
        assert!((c.dist_sq(&ab).unwrap() / frobenius_norm_sq(&ab)).sqrt() < 1e-9);
    }

    #[test]
    fn zero_inputs_stay_zero() {
        let n = 16;
        let z = Matrix::zeros(n);
        let cfg = AmplifyConfig::new(SketchConfig::new(n, 4).with_seed(3), 0.01);
        let (c, trace) = amplify_multiply(&z, &z, &cfg, None).unwrap();
        assert_eq!(c, z);
        assert_eq!(trace.iterations, cfg.planned_iterations());
        assert!(trace.residuals.is_empty());
    }

    #[test]
    fn residual_shrinks() {
        let n = 32;
        let (a, b, ab) = inputs(n, 4);
        let cfg = AmplifyConfig::new(SketchConfig::new(n, 8).with_seed(5), 1e-8);
        let (c, trace) = amplify_multiply(&a, &b, &cfg, Some(&ab)).unwrap();
        let norm_sq = frobenius_norm_sq(&ab);
        assert!(c.dist_sq(&ab).unwrap() <= 1e-8 * norm_sq);
        assert!(trace.residuals.first().unwrap() < &norm_sq);
        assert_eq!(trace.residuals.len(), trace.iterations);
    }

    #[test]
    fn planned_iterations_formula() {
        let cfg = AmplifyConfig::new(SketchConfig::new(64, 16), 1e-6);
        assert_eq!(cfg.planned_iterations(), 56);
        assert_eq!(AmplifyConfig { max_iters: 10, ..cfg }.planned_iterations(), 10);
    }

    #[test]
    fn validation() {
        let base = SketchConfig::new(8, 2);
        let z = Matrix::zeros(8);
        for (eps, iters) in [(0.0, 5), (1.0, 5), (f64::NAN, 5), (0.1, 0)] {
            let cfg = AmplifyConfig { base, epsilon: eps, max_iters: iters };
            assert!(amplify_multiply(&z, &z, &cfg, None).is_err());
        }
        let cfg = AmplifyConfig::new(base, 0.1);
        assert!(amplify_multiply(&z, &Matrix::zeros(4), &cfg, None).is_err());
    }
}
