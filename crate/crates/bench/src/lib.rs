//! Synthetic workloads for the benchmarks.

use dmr_core::{Dataset, FeatureVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian blobs with unit spread, class `k` centred `separation` along axis `k mod dim`.
pub fn blobs(sizes: &[usize], dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(FeatureVector, String)> = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            let x = (0..dim)
                .map(|j| if j == k % dim { separation } else { 0.0 } + rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push((FeatureVector::new(x).unwrap(), format!("c{k}")));
        }
    }
    rows.shuffle(&mut rng);
    let (samples, labels) = rows.into_iter().unzip();
    Dataset::new(samples, labels).unwrap()
}

/// Uniform queries over `[-span, span]^dim`.
pub fn queries(n: usize, dim: usize, span: f64, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| FeatureVector::new((0..dim).map(|_| rng.random_range(-span..span)).collect()).unwrap())
        .collect()
}
