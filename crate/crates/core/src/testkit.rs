//! Shared helpers for the crate's unit tests: seeded random instances and
//! finite-difference oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::model::FoldedProblem;

/// A dense random fold structure with entries in [-1, 1] and ±1 labels.
pub(crate) fn random_instance(
    t: usize,
    n: usize,
    m1: usize,
    m2: usize,
    seed: u64,
) -> FoldedProblem {
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

pub(crate) fn random_vec(len: usize, seed: u64, scale: f64) -> DVector<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    DVector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}

/// Coordinate-wise central differences of a scalar function.
pub(crate) fn central_diff(
    w: &DVector<f64>,
    step: f64,
    f: impl Fn(&DVector<f64>) -> f64,
) -> DVector<f64> {
    let mut out = DVector::zeros(w.len());
    let mut probe = w.clone();
    for k in 0..w.len() {
        probe[k] = w[k] + step;
        let plus = f(&probe);
        probe[k] = w[k] - step;
        let minus = f(&probe);
        probe[k] = w[k];
        out[k] = (plus - minus) / (2.0 * step);
    }
    out
}
