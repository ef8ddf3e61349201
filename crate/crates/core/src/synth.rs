//! Synthetic dataset generators for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::dataio::Dataset;

/// Two Gaussian blobs with means `±separation/√n · 1` and unit noise,
/// labels alternating +1/-1, with an optional label-flip rate to control
/// the error floor. Deterministic for a fixed seed.
pub fn two_gaussians(
    n_samples: usize,
    n_features: usize,
    separation: f64,
    label_noise: f64,
    seed: u64,
) -> Dataset {
    assert!(n_samples >= 2 && n_features >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mean = separation / (n_features as f64).sqrt();

    let mut samples = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let class = if i % 2 == 0 { 1.0 } else { -1.0 };
        let sample: Vec<(u32, f64)> = (0..n_features)
            .map(|k| {
                let noise: f64 = rng.sample(StandardNormal);
                (k as u32 + 1, class * mean + noise)
            })
            .collect();
        let label = if label_noise > 0.0 && rng.gen_bool(label_noise) {
            -class
        } else {
            class
        };
        samples.push(sample);
        labels.push(label);
    }
    Dataset::new(samples, labels, n_features).expect("generator produces valid datasets")
}
