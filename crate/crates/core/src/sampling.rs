//! Selection of the `r * n` output positions that the sketch computes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AmmError, Result};
use crate::matrix::SeedStream;

/// Policy for choosing the computed positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    /// Uniform size-`rn` subset of all `n^2` positions, without replacement.
    UniformRandom,
    /// Every position in rows `0..r`. Caps the rank of the estimate at `r`.
    FirstRows,
    /// All `n^2` positions; only valid with `r = n`.
    All,
}

impl SamplerMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplerMode::UniformRandom => "uniform-random",
            SamplerMode::FirstRows => "first-rows",
            SamplerMode::All => "all",
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform-random" | "uniform" => Ok(SamplerMode::UniformRandom),
            "first-rows" => Ok(SamplerMode::FirstRows),
            "all" => Ok(SamplerMode::All),
            other => Err(format!("unknown sampler '{other}'")),
        }
    }
}

/// A duplicate-free set of positions in `[n]^2`, kept sorted in row-major
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    n: usize,
    /// Flattened `row * n + col`, strictly increasing.
    flat: Vec<usize>,
}

impl IndexSet {
    /// Builds a set from arbitrary positions, rejecting duplicates and
    /// out-of-range entries.
    pub fn new(n: usize, positions: &[(usize, usize)]) -> Result<Self> {
        let mut flat = Vec::with_capacity(positions.len());
        for &(row, col) in positions {
            if row >= n || col >= n {
                return Err(AmmError::IndexOutOfRange { row, col, n });
            }
            flat.push(row * n + col);
        }
        flat.sort_unstable();
        if let Some(w) = flat.windows(2).find(|w| w[0] == w[1]) {
            return Err(AmmError::InvalidConfig(format!(
                "duplicate position ({}, {})",
                w[0] / n,
                w[0] % n
            )));
        }
        Ok(Self { n, flat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && self.flat.binary_search(&(row * self.n + col)).is_ok()
    }

    /// Positions in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.flat.iter().map(move |&p| (p / n, p % n))
    }

    /// Groups positions by row: yields `(row, flat positions in that row)`.
    pub(crate) fn rows(&self) -> impl Iterator<Item = (usize, &[usize])> + '_ {
        let n = self.n;
        let mut rest = &self.flat[..];
        std::iter::from_fn(move || {
            let first = *rest.first()?;
            let row = first / n;
            let end = rest.partition_point(|&p| p / n == row);
            let (head, tail) = rest.split_at(end);
            rest = tail;
            Some((row, head))
        })
    }
}

/// Chooses `r * n` positions of an `n x n` output according to `mode`.
pub fn sample_indices(mode: SamplerMode, n: usize, r: usize, stream: &mut SeedStream) -> Result<IndexSet> {
    if n == 0 || !n.is_power_of_two() {
        return Err(AmmError::NotPowerOfTwo(n));
    }
    if r < 1 || r > n {
        return Err(AmmError::InvalidConfig(format!("r = {r} must satisfy 1 <= r <= n = {n}")));
    }
    let flat = match mode {
        SamplerMode::All => {
            if r != n {
                return Err(AmmError::InvalidConfig(format!("sampler 'all' requires r = n, got r = {r}, n = {n}")));
            }
            (0..n * n).collect()
        }
        SamplerMode::FirstRows => (0..r * n).collect(),
        SamplerMode::UniformRandom => {
            let total = n * n;
            let take = r * n;
            let mut perm: Vec<usize> = (0..total).collect();
            // partial Fisher-Yates: the first `take` slots are a uniform subset
            for i in 0..take {
                let j = i + stream.below(total - i);
                perm.swap(i, j);
            }
            perm.truncate(take);
            perm.sort_unstable();
            perm
        }
    };
    Ok(IndexSet { n, flat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Seed;
    use proptest::prelude::*;

    #[test]
    fn all_positions() {
        let set = sample_indices(SamplerMode::All, 4, 4, &mut SeedStream::new(Seed(0))).unwrap();
        assert_eq!(set.len(), 16);
        assert!((0..4).all(|i| (0..4).all(|j| set.contains(i, j))));
    }

    #[test]
    fn first_rows_positions() {
        let set = sample_indices(SamplerMode::FirstRows, 4, 2, &mut SeedStream::new(Seed(0))).unwrap();
        let expected: Vec<_> = (0..2).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        assert_eq!(set.iter().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn invalid_parameters() {
        let mut s = SeedStream::new(Seed(0));
        assert!(sample_indices(SamplerMode::UniformRandom, 8, 0, &mut s).is_err());
        assert!(sample_indices(SamplerMode::UniformRandom, 8, 9, &mut s).is_err());
        assert!(sample_indices(SamplerMode::All, 8, 4, &mut s).is_err());
        assert!(sample_indices(SamplerMode::FirstRows, 6, 2, &mut s).is_err());
    }

    #[test]
    fn explicit_sets_are_validated() {
        assert!(IndexSet::new(4, &[(0, 1), (0, 1)]).is_err());
        assert_eq!(IndexSet::new(4, &[(4, 0)]), Err(AmmError::IndexOutOfRange { row: 4, col: 0, n: 4 }));
        let set = IndexSet::new(4, &[(3, 1), (0, 2), (0, 0)]).unwrap();
        assert_eq!(set.iter().collect::<Vec<_>>(), vec![(0, 0), (0, 2), (3, 1)]);
        let rows: Vec<_> = set.rows().map(|(r, p)| (r, p.len())).collect();
        assert_eq!(rows, vec![(0, 2), (3, 1)]);
    }

    #[test]
    fn uniform_marginals_are_r_over_n() {
        let (n, r, draws) = (32usize, 8usize, 100_000usize);
        let mut counts = vec![0u32; n * n];
        let mut s = SeedStream::new(Seed(17));
        for _ in 0..draws {
            for (i, j) in sample_indices(SamplerMode::UniformRandom, n, r, &mut s).unwrap().iter() {
                counts[i * n + j] += 1;
            }
        }
        let p = r as f64 / n as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for (pos, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < 5.0 * se, "position {pos}: {freq}");
        }
    }

    proptest! {
        #[test]
        fn size_and_uniqueness(k in 0u32..7, r_frac in 0.0f64..1.0, seed in any::<u64>(), mode in 0usize..3) {
            let n = 1usize << k;
            let r = match mode {
                2 => n,
                _ => 1 + ((n - 1) as f64 * r_frac) as usize,
            };
            let mode = [SamplerMode::UniformRandom, SamplerMode::FirstRows, SamplerMode::All][mode];
            let set = sample_indices(mode, n, r, &mut SeedStream::new(Seed(seed))).unwrap();
            prop_assert_eq!(set.len(), r * n);
            prop_assert!(set.flat.windows(2).all(|w| w[0] < w[1]));
            let again = sample_indices(mode, n, r, &mut SeedStream::new(Seed(seed))).unwrap();
            prop_assert_eq!(set, again);
        }
    }
}
