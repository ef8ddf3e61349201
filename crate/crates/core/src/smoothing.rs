//! Huber smoothing of the plus function and the smoothed KKT system.
//!
//! The complementarity pair `0 ≤ λ ⊥ C ≥ 0` (with λ eliminated as
//! `λ = -μᵀg(w)`) is rewritten as `C - max(C - μᵀg(w), 0) = 0` and the
//! plus function replaced by its Huber smoothing `h(ε, t)`. Stacking this
//! with the multiplier and stationarity equations, and prepending ε itself,
//! gives the square system `Ê(ε, C, μ, w)` the Newton iteration drives to
//! zero; the merit function is `ψ = ‖Ê‖²`.

use nalgebra::DVector;

use crate::model::{FoldedProblem, ModelEval};

/// State of the smoothing Newton iteration.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub eps: f64,
    pub c: f64,
    pub mu: DVector<f64>,
    pub w: DVector<f64>,
}

impl Iterate {
    /// The standard starting point (ε₀, C₀, 0, 0).
    pub fn start(eps0: f64, c0: f64, dim: usize) -> Self {
        Self {
            eps: eps0,
            c: c0,
            mu: DVector::zeros(dim),
            w: DVector::zeros(dim),
        }
    }

    /// `self + step * delta` without modifying `self`.
    pub fn stepped(&self, delta: &Direction, step: f64) -> Self {
        Self {
            eps: self.eps + step * delta.d_eps,
            c: self.c + step * delta.d_c,
            mu: &self.mu + step * &delta.d_mu,
            w: &self.w + step * &delta.d_w,
        }
    }
}

/// A full Newton direction (Δε, ΔC, Δμ, Δw).
#[derive(Debug, Clone)]
pub struct Direction {
    pub d_eps: f64,
    pub d_c: f64,
    pub d_mu: DVector<f64>,
    pub d_w: DVector<f64>,
}

/// Value and partial derivatives of the Huber function at (ε, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberEval {
    pub value: f64,
    /// ∂h/∂ε (a subdifferential selection when ε = 0).
    pub d_eps: f64,
    /// ∂h/∂t, in [0, 1].
    pub d_t: f64,
}

/// The Huber smoothing of `max(0, t)`:
///
/// ```text
///            ⎧ t - |ε|/2      t > |ε|
/// h(ε, t) =  ⎨ t² / (2|ε|)    0 ≤ t ≤ |ε|      (ε ≠ 0)
///            ⎩ 0              t < 0
/// ```
///
/// and `h(0, t) = max(0, t)`. Negative t always maps to zero, so the
/// sparsity of the plus function is preserved.
///
/// At ε = 0 the derivatives are fixed selections from the generalized
/// gradients: `d_t = 1` for t > 0 and 0 for t ≤ 0; `d_eps = -1/2` for
/// t > 0 and 0 for t ≤ 0.
pub fn huber(eps: f64, t: f64) -> HuberEval {
    if eps == 0.0 {
        if t > 0.0 {
            HuberEval {
                value: t,
                d_eps: -0.5,
                d_t: 1.0,
            }
        } else {
            HuberEval {
                value: 0.0,
                d_eps: 0.0,
                d_t: 0.0,
            }
        }
    } else {
        let a = eps.abs();
        let sign = eps.signum();
        if t > a {
            HuberEval {
                value: t - 0.5 * a,
                d_eps: -0.5 * sign,
                d_t: 1.0,
            }
        } else if t >= 0.0 {
            HuberEval {
                value: t * t / (2.0 * a),
                d_eps: -sign * t * t / (2.0 * eps * eps),
                d_t: t / a,
            }
        } else {
            HuberEval {
                value: 0.0,
                d_eps: 0.0,
                d_t: 0.0,
            }
        }
    }
}

/// The nonsmooth KKT residual
/// `K = [C - max(C - μᵀg(w), 0); (1/(T m1))∇f + (I + C∇g)μ; w + C g(w)]`,
/// length 2·T·n + 1.
pub fn residual_k(fp: &FoldedProblem, c: f64, mu: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let eval = fp.eval(w);
    let dim = fp.dim();
    let mut out = DVector::zeros(2 * dim + 1);
    let t = c - mu.dot(eval.g());
    out[0] = c - t.max(0.0);
    out.rows_mut(1, dim)
        .copy_from(&stationarity_mu(fp, &eval, c, mu));
    out.rows_mut(1 + dim, dim).copy_from(&(w + c * eval.g()));
    out
}

/// `(1/(T m1))∇f(w) + (I + C ∇g(w)) μ`.
pub(crate) fn stationarity_mu(
    fp: &FoldedProblem,
    eval: &ModelEval,
    c: f64,
    mu: &DVector<f64>,
) -> DVector<f64> {
    let scale = 1.0 / fp.val_rows() as f64;
    scale * fp.grad_f(eval) + mu + c * fp.grad_g_apply(eval, mu)
}

/// The smoothed system
/// `Ê = [ε; (1 + κ|ε|)C - h(ε, C - μᵀg(w)); (1/(T m1))∇f + (I + C∇g)μ; w + C g(w)]`,
/// length 2·T·n + 2. At ε = 0 it reduces componentwise to `[0; K]`.
pub fn e_hat(fp: &FoldedProblem, it: &Iterate, kappa: f64) -> DVector<f64> {
    e_hat_with_eval(fp, &fp.eval(&it.w), it, kappa)
}

/// [`e_hat`] reusing an existing evaluation of the current w.
pub fn e_hat_with_eval(
    fp: &FoldedProblem,
    eval: &ModelEval,
    it: &Iterate,
    kappa: f64,
) -> DVector<f64> {
    assert!(kappa > 0.0, "kappa must be positive");
    let dim = fp.dim();
    let mut out = DVector::zeros(2 * dim + 2);
    let t = it.c - it.mu.dot(eval.g());
    out[0] = it.eps;
    out[1] = (1.0 + kappa * it.eps.abs()) * it.c - huber(it.eps, t).value;
    out.rows_mut(2, dim)
        .copy_from(&stationarity_mu(fp, eval, it.c, &it.mu));
    out.rows_mut(2 + dim, dim)
        .copy_from(&(&it.w + it.c * eval.g()));
    out
}

/// The merit function ψ = ‖Ê‖².
pub fn merit_psi(fp: &FoldedProblem, it: &Iterate, kappa: f64) -> f64 {
    e_hat(fp, it, kappa).norm_squared()
}
