#![allow(dead_code)]

use dmr_core::{Dataset, FeatureVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Isotropic Gaussian blobs, one per entry of `sizes`. Class `k` is centred
/// at `separation * e_k` (wrapping over the axes) with unit spread.
pub fn blobs(sizes: &[usize], dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        let mut center = vec![0.0; dim];
        center[k % dim] = separation * (1 + k / dim) as f64;
        for _ in 0..n {
            let x: Vec<f64> = center
                .iter()
                .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(FeatureVector::new(x).unwrap());
            labels.push(format!("class{k}"));
        }
    }
    // interleave classes so streams are not sorted by label
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    Dataset::new(
        order.iter().map(|&i| samples[i].clone()).collect(),
        order.iter().map(|&i| labels[i].clone()).collect(),
    )
    .unwrap()
}

/// Brute-force 1-nearest-neighbour label in raw feature space.
pub fn one_nn(train: &Dataset, x: &FeatureVector) -> String {
    let mut best = (f64::INFINITY, 0usize);
    for (i, t) in train.samples.iter().enumerate() {
        let d: f64 = t.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    train.labels[best.1].clone()
}
