//! Deterministic regeneration of every random tensor from a master seed.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood), which is counter based:
//! the `k`-th output of the stream keyed by `s` is `mix(s + (k + 1) * GOLDEN)`.
//! Its constants are fixed here and must never change, since embeddings are
//! only reproducible as long as the generator is.
//!
//! Stream layout for a master seed `s`:
//! - `SeedSchedule` entry `k` is output `k` of stream `s`. Entry 0 seeds the
//!   self-loop transform, entry `1 + r` the transform of directed relation `r`.
//! - Initial node features come from stream `mix(s ^ FEATURE_DOMAIN)`, so they
//!   never share draws with the transform seeds.
//!
//! Normals use the Box-Muller transform on pairs of 53-bit uniforms, evaluated
//! in `f64` and rounded to `f32`. Uniforms for weights use the top 24 bits.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Version of the stream layout above; written into embedding headers.
pub const GENERATOR_VERSION: u16 = 1;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const FEATURE_DOMAIN: u64 = 0x6E6F_6465_5F66_6561; // "node_fea"

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Output `k` of the stream keyed by `seed`, without iterating.
    #[inline]
    pub fn nth_of(seed: u64, k: u64) -> u64 {
        mix(seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 24 bits of precision.
    #[inline]
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u64 << 24) as f32)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` (Lemire's multiply-shift; bias below 2^-32 for n < 2^32).
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Pair of independent standard normals.
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        (r * libm::cos(theta), r * libm::sin(theta))
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Seeds for every transformation matrix, derived from the master seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSchedule {
    master: u64,
    derived: Vec<u64>,
}

impl SeedSchedule {
    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn derived(&self) -> &[u64] {
        &self.derived
    }

    pub fn len(&self) -> usize {
        self.derived.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derived.is_empty()
    }

    /// Seed of the self-loop transform.
    pub fn self_loop(&self) -> u64 {
        self.derived[0]
    }

    /// Seed of directed relation `r`'s transform.
    pub fn relation(&self, r: usize) -> u64 {
        self.derived[1 + r]
    }

    /// Seed of the initial node feature matrix.
    pub fn features(&self) -> u64 {
        feature_seed(self.master)
    }
}

/// Derives `count` seeds from `master`; entry `k` is output `k` of the master stream.
pub fn derive_seeds(master: u64, count: usize) -> Result<SeedSchedule> {
    if count == 0 {
        return Err(crate::error::invalid("seed count must be at least 1"));
    }
    let mut stream = SplitMix64::new(master);
    let derived = (0..count).map(|_| stream.next_u64()).collect();
    Ok(SeedSchedule { master, derived })
}

/// Seed schedule for a graph with `relations` original relations:
/// one seed per direction of every relation plus one for the self-loop.
pub fn schedule_for_relations(master: u64, relations: usize) -> SeedSchedule {
    derive_seeds(master, 2 * relations + 1).expect("count >= 1")
}

pub fn feature_seed(master: u64) -> u64 {
    mix(master ^ FEATURE_DOMAIN)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightInit {
    /// Uniform on `[-a, a]` with `a = sqrt(6 / (rows + cols))`.
    GlorotUniform,
    /// Zero-mean normal with the given variance.
    Normal { variance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSpec {
    pub rows: usize,
    pub cols: usize,
    pub init: WeightInit,
    pub seed: u64,
}

impl WeightSpec {
    pub fn glorot(rows: usize, cols: usize, seed: u64) -> Self {
        Self { rows, cols, init: WeightInit::GlorotUniform, seed }
    }

    pub fn normal(rows: usize, cols: usize, variance: f64, seed: u64) -> Self {
        Self { rows, cols, init: WeightInit::Normal { variance }, seed }
    }

    pub fn glorot_bound(&self) -> f32 {
        glorot_bound(self.rows, self.cols)
    }
}

pub fn glorot_bound(rows: usize, cols: usize) -> f32 {
    libm::sqrt(6.0 / (rows + cols) as f64) as f32
}

/// Materialises the tensor described by `spec`. Identical specs give bit-identical matrices.
pub fn materialize(spec: &WeightSpec) -> Result<Matrix> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(crate::error::invalid("weight dimensions must be positive"));
    }
    let mut m = Matrix::try_zeros(spec.rows, spec.cols)?;
    fill(spec, m.as_mut_slice());
    Ok(m)
}

/// Like [`materialize`] but checks the allocation against `budget_bytes` first.
pub fn materialize_within(spec: &WeightSpec, budget_bytes: u128) -> Result<Matrix> {
    let bytes = crate::matrix::matrix_bytes(spec.rows, spec.cols)?;
    if bytes > budget_bytes {
        return Err(Error::Capacity { requested_bytes: bytes, budget_bytes });
    }
    materialize(spec)
}

fn fill(spec: &WeightSpec, out: &mut [f32]) {
    let mut rng = SplitMix64::new(spec.seed);
    match spec.init {
        WeightInit::GlorotUniform => {
            let a = spec.glorot_bound();
            for v in out.iter_mut() {
                // 2u - 1 lies in [-1, 1); scaled values never leave [-a, a].
                *v = a * (2.0 * rng.next_f32() - 1.0);
            }
        }
        WeightInit::Normal { variance } => {
            let sd = libm::sqrt(variance);
            let mut chunks = out.chunks_exact_mut(2);
            for pair in &mut chunks {
                let (z0, z1) = rng.next_normal_pair();
                pair[0] = (z0 * sd) as f32;
                pair[1] = (z1 * sd) as f32;
            }
            if let [last] = chunks.into_remainder() {
                *last = (rng.next_normal_pair().0 * sd) as f32;
            }
        }
    }
}

/// Initial node features: `|V| x e` normal matrix with variance `1/e`.
pub fn initial_features(master: u64, nodes: usize, dim: usize) -> Result<Matrix> {
    if nodes == 0 {
        return Matrix::try_zeros(0, dim);
    }
    materialize(&WeightSpec::normal(nodes, dim, 1.0 / dim as f64, feature_seed(master)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of SplitMix64 seeded with 0 (Vigna's splitmix64.c).
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(SplitMix64::nth_of(0, 1), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derive_is_deterministic_and_seed_sensitive() {
        let a = derive_seeds(42, 3).unwrap();
        let b = derive_seeds(42, 3).unwrap();
        let c = derive_seeds(43, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.derived().iter().zip(c.derived()).any(|(x, y)| x != y));
        assert!(derive_seeds(42, 0).is_err());
    }

    #[test]
    fn schedule_count_for_45_relations() {
        assert_eq!(schedule_for_relations(7, 45).len(), 91);
    }

    #[test]
    fn glorot_entries_within_bound() {
        let spec = WeightSpec::glorot(512, 512, 11);
        let w = materialize(&spec).unwrap();
        let a = spec.glorot_bound();
        assert!((a - 0.0765).abs() < 1e-4);
        assert!(w.as_slice().iter().all(|v| v.abs() <= a));
        // Both tails are actually reached.
        assert!(w.as_slice().iter().any(|&v| v > 0.99 * a));
        assert!(w.as_slice().iter().any(|&v| v < -0.99 * a));
    }

    #[test]
    fn materialize_is_bitwise_reproducible() {
        for spec in [WeightSpec::glorot(7, 5, 3), WeightSpec::normal(9, 3, 0.5, 3)] {
            let a = materialize(&spec).unwrap();
            let b = materialize(&spec).unwrap();
            assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn row_sum_of_initial_features_is_standard_normal() {
        // Sample-statistics oracle: with variance 1/e per entry the row sum has variance 1.
        let e = 64;
        let h = initial_features(5, 10_000, e).unwrap();
        let sums: alloc::vec::Vec<f64> =
            (0..h.rows()).map(|i| h.row(i).iter().map(|&v| v as f64).sum()).collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (sums.len() - 1) as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn capacity_error_when_over_budget() {
        let spec = WeightSpec::glorot(1000, 1000, 1);
        assert!(matches!(materialize_within(&spec, 1000), Err(Error::Capacity { .. })));
        assert!(materialize_within(&spec, 4_000_000).is_ok());
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = SplitMix64::new(9);
        for n in 1..50 {
            assert!(r.below(n) < n);
        }
    }
}
