//! Sampling with replacement and the weighted sampling operator.
//!
//! Indices are drawn i.i.d. uniformly over the full index grid, so an entry
//! can be observed more than once. `R_Omega` multiplies each observed entry
//! by its multiplicity and zeroes the rest — it is linear and self-adjoint
//! but *not* a projection whenever duplicates are present, and its operator
//! norm equals the maximum multiplicity.
//!
//! Draws come from a named, versioned, counter-based generator (ChaCha8 with
//! a 64-bit seed); a draw is a single uniform flat index decomposed with the
//! first index fastest, so the same `(dims, m, seed)` always reproduces the
//! same multiset on any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor3, Dims3};

type Index3 = (u32, u32, u32);

/// A multiset of sampled indices with multiplicity counts.
#[derive(Debug, Clone)]
pub struct SamplingSet {
    dims: Dims3,
    draws: Vec<Index3>,
    counts: BTreeMap<Index3, u32>,
    seed: u64,
}

impl SamplingSet {
    /// Draws `m` indices i.i.d. uniformly with replacement.
    pub fn sample(dims: Dims3, m: usize, seed: u64) -> Self {
        assert!(m >= 1, "need at least one draw");
        let (n1, n2, n3) = dims;
        assert!(n1 >= 1 && n2 >= 1 && n3 >= 1, "dims must be positive");
        let total = (n1 * n2 * n3) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws = Vec::with_capacity(m);
        let mut counts = BTreeMap::new();
        for _ in 0..m {
            let flat = rng.random_range(0..total) as usize;
            let i = (flat % n1) as u32;
            let j = ((flat / n1) % n2) as u32;
            let k = (flat / (n1 * n2)) as u32;
            draws.push((i, j, k));
            *counts.entry((i, j, k)).or_insert(0) += 1;
        }
        SamplingSet {
            dims,
            draws,
            counts,
            seed,
        }
    }

    /// Rebuilds a sampling set from an explicit draw list (deserialization).
    pub fn from_draws(dims: Dims3, draws: Vec<(u32, u32, u32)>, seed: u64) -> Result<Self> {
        let (n1, n2, n3) = dims;
        let mut counts = BTreeMap::new();
        for &(i, j, k) in &draws {
            if i as usize >= n1 || j as usize >= n2 || k as usize >= n3 {
                return Err(Error::InvalidArgument(format!(
                    "draw ({i},{j},{k}) is out of bounds for dims {dims:?}"
                )));
            }
            *counts.entry((i, j, k)).or_insert(0) += 1;
        }
        if draws.is_empty() {
            return Err(Error::InvalidArgument("empty draw list".into()));
        }
        Ok(SamplingSet {
            dims,
            draws,
            counts,
            seed,
        })
    }

    #[inline]
    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    /// Number of draws `m` (counting duplicates).
    #[inline]
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// The seed this set was generated from. For partition groups this is the
    /// parent's seed (provenance only; groups are not regenerable on their own).
    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampling density `p = m / (n1 n2 n3)`.
    pub fn density(&self) -> f64 {
        let (n1, n2, n3) = self.dims;
        self.draws.len() as f64 / (n1 * n2 * n3) as f64
    }

    /// The ordered draw list, duplicates included.
    #[inline]
    pub fn draws(&self) -> &[(u32, u32, u32)] {
        &self.draws
    }

    /// Multiplicity map in sorted index order.
    #[inline]
    pub fn counts(&self) -> &BTreeMap<(u32, u32, u32), u32> {
        &self.counts
    }

    /// The sampling operator: entry `(i,j,k)` of the output is
    /// `multiplicity * z[i,j,k]`, zero off the support.
    pub fn apply_r_omega(&self, z: &DenseTensor3) -> Result<DenseTensor3> {
        if z.dims() != self.dims {
            return Err(Error::shape("apply_r_omega", self.dims, z.dims()));
        }
        let mut out = DenseTensor3::zeros(self.dims.0, self.dims.1, self.dims.2);
        for (&(i, j, k), &c) in &self.counts {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            out.set(i, j, k, c as f64 * z.get(i, j, k));
        }
        Ok(out)
    }

    /// Largest multiplicity of any entry.
    pub fn max_multiplicity(&self) -> u32 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// The weighted quadratic form `sum over support of mult * (a - b)^2`.
    ///
    /// Equals `<a - b, R_Omega(a - b)>` but only touches observed entries.
    pub fn weighted_residual_sq(&self, a: &DenseTensor3, b: &DenseTensor3) -> Result<f64> {
        if a.dims() != self.dims || b.dims() != self.dims {
            return Err(Error::shape("weighted_residual_sq", a.dims(), b.dims()));
        }
        let mut acc = 0.0;
        for (&(i, j, k), &c) in &self.counts {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            let d = a.get(i, j, k) - b.get(i, j, k);
            acc += c as f64 * d * d;
        }
        Ok(acc)
    }

    /// Splits the draw list into `groups` contiguous groups of size
    /// `floor(m / groups)`, with the remainder assigned to group 0.
    pub fn partition(&self, groups: usize) -> Result<Vec<SamplingSet>> {
        let m = self.draws.len();
        if groups == 0 || groups > m {
            return Err(Error::InvalidArgument(format!(
                "cannot split {m} draws into {groups} groups"
            )));
        }
        let base = m / groups;
        let extra = m % groups;
        let mut out = Vec::with_capacity(groups);
        let mut start = 0;
        for g in 0..groups {
            let size = if g == 0 { base + extra } else { base };
            let part = self.draws[start..start + size].to_vec();
            start += size;
            out.push(SamplingSet::from_draws(self.dims, part, self.seed)?);
        }
        Ok(out)
    }
}
