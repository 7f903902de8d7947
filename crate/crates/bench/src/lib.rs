//! Shared inputs for the benchmarks.

use amm_core::{generate, GeneratorKind, Matrix, Seed, SeedStream};

/// A pair of Gaussian `n x n` matrices drawn from a fixed seed.
pub fn gaussian_pair(n: usize) -> (Matrix, Matrix) {
    let mut s = SeedStream::new(Seed(0xBE7C));
    let a = generate(GeneratorKind::Gaussian, n, &mut s).expect("n is a power of two");
    let b = generate(GeneratorKind::Gaussian, n, &mut s).expect("n is a power of two");
    (a, b)
}
