//! Seeded synthetic weights and inputs for functional checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{FeatureMap, WeightTensor};

/// Stable per-layer seed derived from a base seed and the layer index.
pub fn layer_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn weights_f64(dims: [usize; 4], seed: u64, lo: f64, hi: f64) -> WeightTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightTensor::from_fn(dims, |_| rng.random_range(lo..hi))
}

pub fn weights_i64(dims: [usize; 4], seed: u64, lo: i64, hi: i64) -> WeightTensor<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightTensor::from_fn(dims, |_| rng.random_range(lo..=hi))
}

pub fn feature_i64(dims: [usize; 3], seed: u64, lo: i64, hi: i64) -> FeatureMap<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(dims, |_| rng.random_range(lo..=hi))
}
