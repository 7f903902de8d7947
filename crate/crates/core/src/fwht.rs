//! Fast Walsh-Hadamard transform.
//!
//! `H_n` is the normalized Hadamard matrix, `H_n[i][j] = (-1)^popcount(i & j) / sqrt(n)`.
//! It is symmetric, orthogonal and its own inverse. The butterflies run
//! unnormalized and the scale is applied in one pass at the end.

use rayon::prelude::*;

use crate::error::{AmmError, Result};
use crate::matrix::Matrix;

fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(AmmError::NotPowerOfTwo(n));
    }
    Ok(())
}

/// Unnormalized in-place butterflies, stride doubling.
fn butterflies(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Replaces `v` with `H v`. The length must be a power of two.
pub fn fwht_vector(v: &mut [f64]) -> Result<()> {
    check_pow2(v.len())?;
    butterflies(v);
    if v.len() > 1 {
        let scale = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(())
}

/// Column butterflies applied across whole rows: row pairs `(j, j + h)` are
/// combined elementwise, which keeps every access contiguous.
fn column_butterflies(data: &mut [f64], n: usize) {
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h * n) {
            let (top, bottom) = block.split_at_mut(h * n);
            for (a, b) in top.iter_mut().zip(bottom.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn column_butterflies_par(data: &mut [f64], n: usize) {
    let mut h = 1;
    while h < n {
        data.par_chunks_exact_mut(2 * h * n).for_each(|block| {
            let (top, bottom) = block.split_at_mut(h * n);
            top.par_chunks_mut(n).zip(bottom.par_chunks_mut(n)).for_each(|(ra, rb)| {
                for (a, b) in ra.iter_mut().zip(rb.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = x + y;
                    *b = x - y;
                }
            });
        });
        h *= 2;
    }
}

fn scale_by_inverse_n(data: &mut [f64], n: usize) {
    // 1/n is exact for a power of two
    let scale = 1.0 / n as f64;
    data.iter_mut().for_each(|x| *x *= scale);
}

/// Returns `H m H`: butterflies along every row, then along every column,
/// then a single `1/n` scaling. Equivalent to one transform of length `n^2`
/// on the row-major vectorization of `m`.
pub fn fwht_two_sided(m: &Matrix) -> Result<Matrix> {
    let n = m.n();
    check_pow2(n)?;
    let mut data = m.as_slice().to_vec();
    data.chunks_exact_mut(n).for_each(butterflies);
    column_butterflies(&mut data, n);
    scale_by_inverse_n(&mut data, n);
    Ok(Matrix::from_raw(n, data))
}

/// Row-parallel [`fwht_two_sided`]. Every output entry sees the same
/// operations in the same order, so the result is bit-identical to the
/// serial version.
pub fn fwht_two_sided_parallel(m: &Matrix) -> Result<Matrix> {
    let n = m.n();
    check_pow2(n)?;
    let mut data = m.as_slice().to_vec();
    data.par_chunks_exact_mut(n).for_each(butterflies);
    column_butterflies_par(&mut data, n);
    scale_by_inverse_n(&mut data, n);
    Ok(Matrix::from_raw(n, data))
}

/// Single entry of the normalized Hadamard matrix. Meant for brute-force
/// oracles, not for computing transforms.
pub fn hadamard_entry(i: usize, j: usize, n: usize) -> Result<f64> {
    check_pow2(n)?;
    if i >= n || j >= n {
        return Err(AmmError::IndexOutOfRange { row: i, col: j, n });
    }
    let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign / (n as f64).sqrt())
}
