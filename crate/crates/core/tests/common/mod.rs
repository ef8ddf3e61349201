//! Helpers shared by the integration suites: seeded random instances and
//! dataset paths for the published-results checks.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use svctune::model::FoldedProblem;

pub fn random_instance(t: usize, n: usize, m1: usize, m2: usize, seed: u64) -> FoldedProblem {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut a_blocks = Vec::with_capacity(t);
    let mut x_blocks = Vec::with_capacity(t);
    let mut yhat_blocks = Vec::with_capacity(t);
    for _ in 0..t {
        a_blocks.push(DMatrix::from_fn(m1, n, |_, _| rng.gen_range(-1.0..1.0)));
        x_blocks.push(DMatrix::from_fn(n, m2, |_, _| rng.gen_range(-1.0..1.0)));
        yhat_blocks.push(DVector::from_fn(m2, |_, _| {
            if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        }));
    }
    FoldedProblem::from_parts(a_blocks, x_blocks, yhat_blocks).expect("valid shapes")
}

pub fn random_vec(len: usize, seed: u64, scale: f64) -> DVector<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    DVector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}

/// Directory holding the published LIBSVM dataset copies, overridable via
/// `SVCTUNE_DATA_DIR`.
pub fn data_dir() -> std::path::PathBuf {
    match std::env::var_os("SVCTUNE_DATA_DIR") {
        Some(dir) => dir.into(),
        None => {
            let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
            manifest
                .join("../../data")
                .canonicalize()
                .unwrap_or_else(|_| manifest.join("../../data"))
        }
    }
}
