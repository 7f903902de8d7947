//! The preconditioning rotation `W_{a,b}(X) = H D_a X D_b H` and its inverse
//! `W_{a,b}^{-1}(Y) = D_a H Y H D_b`.
//!
//! `W` is linear, norm preserving, and multiplicative across a shared middle
//! key: `W_{a,b}(XY) = W_{a,g}(X) W_{g,b}(Y)` for any sign vector `g`.

use crate::error::{AmmError, Result};
use crate::fwht::fwht_two_sided;
use crate::matrix::{diag_scale, frobenius_norm_sq, random_signs, Matrix, SeedStream, SignVector};

/// The three sign vectors of one sketch: `alpha` scales rows of `A`, `beta`
/// columns of `B`, and `gamma` sits between the two factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RotationKeys {
    pub alpha: SignVector,
    pub beta: SignVector,
    pub gamma: SignVector,
}

impl RotationKeys {
    pub fn new(alpha: SignVector, beta: SignVector, gamma: SignVector) -> Result<Self> {
        let n = alpha.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(AmmError::NotPowerOfTwo(n));
        }
        for v in [&beta, &gamma] {
            if v.len() != n {
                return Err(AmmError::DimensionMismatch { expected: n, actual: v.len() });
            }
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Draws `alpha`, `beta`, `gamma` from the stream, in that order.
    pub fn draw(n: usize, stream: &mut SeedStream) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(AmmError::NotPowerOfTwo(n));
        }
        let alpha = random_signs(n, stream)?;
        let beta = random_signs(n, stream)?;
        let gamma = random_signs(n, stream)?;
        Ok(Self { alpha, beta, gamma })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }
}

/// `H D_left m D_right H`.
pub fn rotate(m: &Matrix, left: &SignVector, right: &SignVector) -> Result<Matrix> {
    fwht_two_sided(&diag_scale(m, left, right)?)
}

/// `D_left H m H D_right`, the exact inverse of [`rotate`] with the same keys.
pub fn rotate_inverse(m: &Matrix, left: &SignVector, right: &SignVector) -> Result<Matrix> {
    for v in [left, right] {
        if v.len() != m.n() {
            return Err(AmmError::DimensionMismatch { expected: m.n(), actual: v.len() });
        }
    }
    diag_scale(&fwht_two_sided(m)?, left, right)
}

/// Residuals of the product law, both measured in Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplicativityResidual {
    /// `||W_{a,b}(AB) - W_{a,g}(A) W_{g,b}(B)||_F`
    pub forward: f64,
    /// `||W^{-1}_{a,b}(AB) - W^{-1}_{a,g}(A) W^{-1}_{g,b}(B)||_F`
    pub inverse: f64,
    /// `||AB||_F`, for relative comparisons.
    pub product_norm: f64,
}

impl MultiplicativityResidual {
    /// Larger of the two residuals relative to `||AB||_F` (absolute when the
    /// product is zero).
    pub fn relative(&self) -> f64 {
        let worst = self.forward.max(self.inverse);
        if self.product_norm > 0.0 {
            worst / self.product_norm
        } else {
            worst
        }
    }
}

/// Checks `W_{a,b}(AB) = W_{a,g}(A) W_{g,b}(B)` and the same law for the
/// inverse operator.
pub fn check_multiplicativity(a: &Matrix, b: &Matrix, keys: &RotationKeys) -> Result<MultiplicativityResidual> {
    a.check_same(b)?;
    if keys.n() != a.n() {
        return Err(AmmError::DimensionMismatch { expected: a.n(), actual: keys.n() });
    }
    let RotationKeys { alpha, beta, gamma } = keys;
    let ab = a.matmul(b)?;

    let lhs = rotate(&ab, alpha, beta)?;
    let rhs = rotate(a, alpha, gamma)?.matmul(&rotate(b, gamma, beta)?)?;
    let forward = lhs.dist_sq(&rhs)?.sqrt();

    let lhs = rotate_inverse(&ab, alpha, beta)?;
    let rhs = rotate_inverse(a, alpha, gamma)?.matmul(&rotate_inverse(b, gamma, beta)?)?;
    let inverse = lhs.dist_sq(&rhs)?.sqrt();

    Ok(MultiplicativityResidual { forward, inverse, product_norm: frobenius_norm_sq(&ab).sqrt() })
}
