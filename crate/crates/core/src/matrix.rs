//! Dense square matrices, sign vectors and the seeded random streams that
//! drive every randomized step.
//!
//! Storage is row-major `f64`, and every reduction sums in row-major order so
//! that single-threaded runs are bit-reproducible.

use std::fmt;
use std::ops::{Index, Mul};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AmmError, Result};

/// Dense `n x n` matrix of finite reals, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(AmmError::Empty);
        }
        if data.len() != n * n {
            return Err(AmmError::BadDataLength { len: data.len(), expected: n * n });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(AmmError::NonFinite { row: pos / n, col: pos % n });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(AmmError::DimensionMismatch { expected: n, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(n, data)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::from_vec(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "matrix side length must be positive");
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps data produced by the crate's own finite arithmetic.
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.data[i * n + j];
            }
        }
        Matrix::from_raw(n, out)
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix::from_raw(self.n, self.data.iter().map(|x| x * factor).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + y).collect();
        Ok(Matrix::from_raw(self.n, data))
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x - y).collect();
        Ok(Matrix::from_raw(self.n, data))
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.n, other.n);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
    }

    /// Classical product with the fixed `i, k, j` loop order.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += aik * b;
                }
            }
        }
        Ok(Matrix::from_raw(n, out))
    }

    /// Squared Frobenius distance `||self - other||_F^2`.
    pub fn dist_sq(&self, other: &Matrix) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| (x - y) * (x - y)).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// Copies this matrix into the top-left block of a zero `padded x padded`
    /// matrix.
    pub fn zero_padded(&self, padded: usize) -> Result<Matrix> {
        if padded < self.n {
            return Err(AmmError::DimensionMismatch { expected: self.n, actual: padded });
        }
        let mut out = Matrix::zeros(padded);
        for i in 0..self.n {
            out.data[i * padded..i * padded + self.n].copy_from_slice(self.row(i));
        }
        Ok(out)
    }

    pub(crate) fn check_same(&self, other: &Matrix) -> Result<()> {
        if self.n != other.n {
            return Err(AmmError::DimensionMismatch { expected: self.n, actual: other.n });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.data[row * self.n + col]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    /// Panics on mismatched sizes; use [`Matrix::matmul`] for a `Result`.
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix sizes must agree")
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.n.min(8)])?;
        }
        write!(f, "]")
    }
}

/// Sum of squared entries in row-major order.
pub fn frobenius_norm_sq(m: &Matrix) -> f64 {
    m.data.iter().map(|x| x * x).sum()
}

/// A vector of `+1` / `-1` entries, used as a diagonal scaling.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignVector {
    signs: Vec<i8>,
}

impl SignVector {
    pub fn ones(n: usize) -> Self {
        Self { signs: vec![1; n] }
    }

    pub fn from_signs(signs: &[f64]) -> Result<Self> {
        if signs.is_empty() {
            return Err(AmmError::Empty);
        }
        let signs = signs
            .iter()
            .enumerate()
            .map(|(i, &s)| match s {
                s if s == 1.0 => Ok(1),
                s if s == -1.0 => Ok(-1),
                s => Err(AmmError::InvalidSign(s, i)),
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Self { signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.signs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.signs.iter().map(|&s| f64::from(s))
    }
}

/// Seed for a [`SeedStream`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

/// Deterministic source of randomness.
///
/// Backed by ChaCha8 seeded from a 64-bit [`Seed`]. Independent sub-streams
/// (one per Monte Carlo trial, say) are obtained with [`SeedStream::substream`],
/// which selects a ChaCha stream id, so trial `t` is reproducible on its own
/// without replaying trials `0..t`.
#[derive(Clone, Debug)]
pub struct SeedStream {
    rng: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: Seed) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed.0) }
    }

    pub fn substream(seed: Seed, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn sign(&mut self) -> i8 {
        if self.rng.random::<bool>() {
            1
        } else {
            -1
        }
    }

    /// Standard normal draw (ziggurat, from `rand_distr`).
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}

/// Draws `n` independent uniform signs.
pub fn random_signs(n: usize, stream: &mut SeedStream) -> Result<SignVector> {
    if n == 0 {
        return Err(AmmError::Empty);
    }
    Ok(SignVector { signs: (0..n).map(|_| stream.sign()).collect() })
}

/// Returns the matrix with entry `(i, j)` equal to `left_i * m_ij * right_j`.
pub fn diag_scale(m: &Matrix, left: &SignVector, right: &SignVector) -> Result<Matrix> {
    let n = m.n();
    for v in [left, right] {
        if v.len() != n {
            return Err(AmmError::DimensionMismatch { expected: n, actual: v.len() });
        }
    }
    let mut data = m.data.clone();
    for (i, row) in data.chunks_exact_mut(n).enumerate() {
        let li = left.get(i);
        for (x, rj) in row.iter_mut().zip(right.iter()) {
            *x *= li * rj;
        }
    }
    Ok(Matrix::from_raw(n, data))
}

/// Test-input families for the benchmark harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Gaussian,
    Rademacher,
    /// Zero except a single entry of magnitude `n` at `(0, 0)`, so the norm
    /// matches a Rademacher matrix of the same size.
    Spiky,
    RankOne,
    Zero,
    Identity,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 6] = [
        GeneratorKind::Gaussian,
        GeneratorKind::Rademacher,
        GeneratorKind::Spiky,
        GeneratorKind::RankOne,
        GeneratorKind::Zero,
        GeneratorKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Gaussian => "gaussian",
            GeneratorKind::Rademacher => "rademacher",
            GeneratorKind::Spiky => "spiky",
            GeneratorKind::RankOne => "rank-one",
            GeneratorKind::Zero => "zero",
            GeneratorKind::Identity => "identity",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Generates an `n x n` matrix of the given kind; `n` must be a power of two.
pub fn generate(kind: GeneratorKind, n: usize, stream: &mut SeedStream) -> Result<Matrix> {
    if !n.is_power_of_two() {
        return Err(AmmError::NotPowerOfTwo(n));
    }
    Ok(generate_any(kind, n, stream))
}

/// Generates a `logical_n x logical_n` matrix of the given kind, zero-padded
/// up to the next power of two.
pub fn generate_padded(kind: GeneratorKind, logical_n: usize, stream: &mut SeedStream) -> Result<Matrix> {
    if logical_n == 0 {
        return Err(AmmError::Empty);
    }
    generate_any(kind, logical_n, stream).zero_padded(logical_n.next_power_of_two())
}

fn generate_any(kind: GeneratorKind, n: usize, stream: &mut SeedStream) -> Matrix {
    match kind {
        GeneratorKind::Gaussian => Matrix::from_raw(n, (0..n * n).map(|_| stream.gaussian()).collect()),
        GeneratorKind::Rademacher => {
            Matrix::from_raw(n, (0..n * n).map(|_| f64::from(stream.sign())).collect())
        }
        GeneratorKind::Spiky => {
            let mut m = Matrix::zeros(n);
            m.data[0] = f64::from(stream.sign()) * n as f64;
            m
        }
        GeneratorKind::RankOne => {
            let u: Vec<f64> = (0..n).map(|_| stream.gaussian()).collect();
            let v: Vec<f64> = (0..n).map(|_| stream.gaussian()).collect();
            let data = u.iter().flat_map(|ui| v.iter().map(move |vj| ui * vj)).collect();
            Matrix::from_raw(n, data)
        }
        GeneratorKind::Zero => Matrix::zeros(n),
        GeneratorKind::Identity => Matrix::identity(n),
    }
}
