//! Bi-conjugate gradients for square, possibly nonsymmetric systems.
//!
//! The reduced Newton system is nonsymmetric (the h₂ border row and the α
//! block break symmetry), so plain CG does not apply. The solver works
//! through apply/apply-transpose closures and never forms the matrix.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Tolerances and limits for one Bi-CG solve.
#[derive(Debug, Clone)]
pub struct KrylovConfig {
    pub max_iters: usize,
    /// Residual target relative to ‖rhs‖.
    pub rel_tol: f64,
    /// Absolute residual floor.
    pub abs_tol: f64,
    /// Inner products below this magnitude count as breakdown.
    pub breakdown_tol: f64,
}

impl KrylovConfig {
    /// Defaults for an n-dimensional system: at most 10·n iterations.
    pub fn for_size(n: usize) -> Self {
        Self {
            max_iters: 10 * n.max(1),
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            breakdown_tol: 1e-30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovStatus {
    Converged,
    MaxIters,
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub solution: DVector<f64>,
    /// True residual norm ‖rhs - M·solution‖, always recomputed; never the
    /// recursive residual.
    pub residual_norm: f64,
    pub iters: usize,
    pub status: KrylovStatus,
}

/// Solves `M x = rhs` from a zero initial guess.
///
/// The shadow residual starts at `rhs` (deterministic); on breakdown the
/// solve restarts once with a seeded pseudo-random shadow vector. If that
/// also breaks down or the iteration cap is hit, the best iterate seen is
/// returned with the corresponding status and the caller decides on a
/// fallback.
pub fn bicg_solve(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    apply_t: impl Fn(&DVector<f64>) -> DVector<f64>,
    rhs: &DVector<f64>,
    cfg: &KrylovConfig,
) -> KrylovResult {
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return KrylovResult {
            solution: DVector::zeros(rhs.len()),
            residual_norm: 0.0,
            iters: 0,
            status: KrylovStatus::Converged,
        };
    }
    let tol = (cfg.rel_tol * rhs_norm).max(cfg.abs_tol);
    if rhs_norm <= tol {
        // The zero guess already meets the target.
        return KrylovResult {
            solution: DVector::zeros(rhs.len()),
            residual_norm: rhs_norm,
            iters: 0,
            status: KrylovStatus::Converged,
        };
    }

    let first = bicg_core(&apply, &apply_t, rhs, rhs.clone(), tol, cfg);
    if first.status != KrylovStatus::Breakdown {
        return first;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_b1c6);
    let shadow = DVector::from_fn(rhs.len(), |_, _| rng.gen_range(-1.0..1.0));
    let retry = bicg_core(&apply, &apply_t, rhs, shadow, tol, cfg);
    if retry.residual_norm <= first.residual_norm {
        retry
    } else {
        first
    }
}

fn bicg_core(
    apply: &impl Fn(&DVector<f64>) -> DVector<f64>,
    apply_t: &impl Fn(&DVector<f64>) -> DVector<f64>,
    rhs: &DVector<f64>,
    shadow: DVector<f64>,
    tol: f64,
    cfg: &KrylovConfig,
) -> KrylovResult {
    let mut x = DVector::zeros(rhs.len());
    let mut r = rhs.clone();
    let mut r_hat = shadow;
    let mut p = r.clone();
    let mut p_hat = r_hat.clone();
    let mut rho = r_hat.dot(&r);

    let mut best_x = x.clone();
    let mut best_norm = r.norm();

    let finish = |x: DVector<f64>, iters: usize, status: KrylovStatus| {
        let residual_norm = (rhs - apply(&x)).norm();
        KrylovResult {
            solution: x,
            residual_norm,
            iters,
            status,
        }
    };

    for iter in 1..=cfg.max_iters {
        if rho.abs() < cfg.breakdown_tol {
            return finish(best_x, iter - 1, KrylovStatus::Breakdown);
        }
        let q = apply(&p);
        let q_hat = apply_t(&p_hat);
        let denom = p_hat.dot(&q);
        if denom.abs() < cfg.breakdown_tol {
            return finish(best_x, iter - 1, KrylovStatus::Breakdown);
        }
        let alpha = rho / denom;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        r_hat.axpy(-alpha, &q_hat, 1.0);

        let rec_norm = r.norm();
        if !rec_norm.is_finite() {
            return finish(best_x, iter, KrylovStatus::Breakdown);
        }
        if rec_norm < best_norm {
            best_norm = rec_norm;
            best_x.copy_from(&x);
        }
        if rec_norm <= tol {
            // Guard against recursive-residual drift before accepting.
            let true_norm = (rhs - apply(&x)).norm();
            if true_norm <= tol {
                return KrylovResult {
                    solution: x,
                    residual_norm: true_norm,
                    iters: iter,
                    status: KrylovStatus::Converged,
                };
            }
        }

        let rho_new = r_hat.dot(&r);
        let beta = rho_new / rho;
        rho = rho_new;
        p = &r + beta * p;
        p_hat = &r_hat + beta * p_hat;
    }
    finish(best_x, cfg.max_iters, KrylovStatus::MaxIters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn dense_ops(
        m: DMatrix<f64>,
    ) -> (
        impl Fn(&DVector<f64>) -> DVector<f64>,
        impl Fn(&DVector<f64>) -> DVector<f64>,
    ) {
        let mt = m.transpose();
        (
            move |v: &DVector<f64>| &m * v,
            move |v: &DVector<f64>| &mt * v,
        )
    }

    fn random_diag_dominant(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            m[(i, i)] += n as f64;
        }
        m
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let (a, at) = dense_ops(DMatrix::identity(6, 6));
        let rhs = DVector::from_fn(6, |i, _| 1.0 + i as f64);
        let res = bicg_solve(a, at, &rhs, &KrylovConfig::for_size(6));
        assert_eq!(res.status, KrylovStatus::Converged);
        assert_eq!(res.iters, 1);
        assert!((res.solution - rhs).norm() < 1e-14);
    }

    #[test]
    fn zero_rhs_returns_zero_immediately() {
        let (a, at) = dense_ops(random_diag_dominant(5, 3));
        let rhs = DVector::zeros(5);
        let res = bicg_solve(a, at, &rhs, &KrylovConfig::for_size(5));
        assert_eq!(res.iters, 0);
        assert_eq!(res.status, KrylovStatus::Converged);
        assert_eq!(res.solution.norm(), 0.0);
        assert_eq!(res.residual_norm, 0.0);
    }

    #[test]
    fn matches_direct_elimination() {
        for seed in 0..10 {
            let m = random_diag_dominant(5, 100 + seed);
            let rhs = DVector::from_fn(5, |i, _| {
                ((i + 1) as f64) * if i % 2 == 0 { 1.0 } else { -1.0 }
            });
            let exact = m.clone().lu().solve(&rhs).unwrap();
            let mut cfg = KrylovConfig::for_size(5);
            cfg.rel_tol = 1e-12;
            let (a, at) = dense_ops(m);
            let res = bicg_solve(a, at, &rhs, &cfg);
            assert_eq!(res.status, KrylovStatus::Converged);
            assert!((res.solution - exact).norm() <= 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn reported_residual_is_recomputed() {
        let m = random_diag_dominant(8, 9);
        let rhs = DVector::from_element(8, 1.0);
        let (a, at) = dense_ops(m.clone());
        let res = bicg_solve(a, at, &rhs, &KrylovConfig::for_size(8));
        let true_norm = (&rhs - &m * &res.solution).norm();
        assert_eq!(res.residual_norm, true_norm);
    }

    #[test]
    fn deterministic_bitwise() {
        let m = random_diag_dominant(7, 21);
        let rhs = DVector::from_fn(7, |i, _| (i as f64).sin());
        let (a1, at1) = dense_ops(m.clone());
        let (a2, at2) = dense_ops(m);
        let r1 = bicg_solve(a1, at1, &rhs, &KrylovConfig::for_size(7));
        let r2 = bicg_solve(a2, at2, &rhs, &KrylovConfig::for_size(7));
        assert_eq!(r1.iters, r2.iters);
        assert!(r1
            .solution
            .iter()
            .zip(r2.solution.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn breakdown_recovers_with_perturbed_shadow() {
        // Swap matrix with rhs = e1: the first search direction gives
        // p̂ᵀ(Mp) = 0 exactly, a textbook breakdown of the rhs-shadow.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let rhs = DVector::from_column_slice(&[1.0, 0.0]);
        let (a, at) = dense_ops(m);
        let res = bicg_solve(a, at, &rhs, &KrylovConfig::for_size(2));
        assert_eq!(res.status, KrylovStatus::Converged);
        assert!((res.solution - DVector::from_column_slice(&[0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn transpose_consistency_precondition() {
        // The contract assumed of callers: ⟨Mu, v⟩ = ⟨u, Mᵀv⟩.
        let m = random_diag_dominant(6, 33);
        let (a, at) = dense_ops(m);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            let v = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            assert!((a(&u).dot(&v) - u.dot(&at(&v))).abs() < 1e-10);
        }
    }
}
