//! The squared smoothing Newton outer loop.
//!
//! Each iteration evaluates Ê, computes the forcing terms
//! `η_k = min{1, r̂‖Ê‖^τ}` and `ζ_k = r·min{1, ‖Ê‖^{1+τ}}`, fixes
//! `Δε = -ε + ζ_k ε̂`, solves the reduced system inexactly by Bi-CG until
//! the true residual satisfies both `‖R_k‖ ≤ η_k‖Ê‖` and `‖R_k‖ ≤ η̂‖Ê‖`,
//! then backtracks on the merit `ψ = ‖Ê‖²` with the Armijo-type test
//! `ψ(x + ρ^ℓΔ) ≤ [1 - 2σ(1-δ)ρ^ℓ]ψ(x)`.
//!
//! ε stays positive along the iteration: the trial value is the convex
//! combination `(1-ρ^ℓ)ε + ρ^ℓ ζ_k ε̂` of two positive numbers.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bicg::{bicg_solve, KrylovConfig, KrylovStatus};
use crate::diagnostics::{classify, SecondOrderReport};
use crate::jacobian::{JacobianBlocks, JacobianMode};
use crate::model::{FoldedProblem, ModelEval};
use crate::smoothing::{e_hat_with_eval, Direction, Iterate};

pub const LINE_SEARCH_CAP: usize = 60;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("line search hit the {cap}-step cap at outer iteration {k} (psi = {psi:.6e}); the computed direction is not a descent direction")]
    LineSearchStall { k: usize, psi: f64, cap: usize },
    #[error("newton system unsolvable at outer iteration {k}: {msg}")]
    SingularSystem { k: usize, msg: String },
    #[error(
        "non-finite value in the {block} block of the smoothing system at outer iteration {k}"
    )]
    NonFinite { block: &'static str, k: usize },
}

/// Every knob of the smoothing Newton method, with the standard defaults
/// ε̂ = 0.5, r = r̂ = 0.6, η̂ = 0.2, ρ = 0.5, σ = 1e-8, τ = 0.2, κ = 1,
/// ε₀ = C₀ = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps_hat: f64,
    pub r: f64,
    pub r_hat: f64,
    pub eta_hat: f64,
    pub rho: f64,
    pub sigma: f64,
    pub tau: f64,
    pub kappa: f64,
    pub eps0: f64,
    pub c0: f64,
    /// Outer stopping tolerance on ‖Ê‖₂.
    pub tol: f64,
    pub max_outer: usize,
    pub jacobian_mode: JacobianMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_hat: 0.5,
            r: 0.6,
            r_hat: 0.6,
            eta_hat: 0.2,
            rho: 0.5,
            sigma: 1e-8,
            tau: 0.2,
            kappa: 1.0,
            eps0: 1.0,
            c0: 1.0,
            tol: 0.1,
            max_outer: 200,
            jacobian_mode: JacobianMode::Implicit,
        }
    }
}

impl SolverConfig {
    /// δ = √2·max{r ε̂, η̂}; the line-search contraction factor. Must be
    /// below one for the method to be well defined.
    pub fn delta(&self) -> f64 {
        std::f64::consts::SQRT_2 * (self.r * self.eps_hat).max(self.eta_hat)
    }

    // Negated comparisons reject NaN inputs, which `x <= 0.0` would let through.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::BadConfig(msg));
        if !(self.eps_hat > 0.0) {
            return bad(format!("eps_hat must be positive, got {}", self.eps_hat));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return bad(format!("r must lie in (0,1), got {}", self.r));
        }
        if !(self.r_hat > 0.0) {
            return bad(format!("r_hat must be positive, got {}", self.r_hat));
        }
        if !(self.eta_hat > 0.0) {
            return bad(format!("eta_hat must be positive, got {}", self.eta_hat));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0,1), got {}", self.rho));
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return bad(format!("sigma must lie in (0,1/2), got {}", self.sigma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0,1], got {}", self.tau));
        }
        if !(self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.eps0 > 0.0) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        let delta = self.delta();
        if !(delta < 1.0) {
            return bad(format!(
                "delta = sqrt(2)*max(r*eps_hat, eta_hat) = {delta} must be below 1"
            ));
        }
        Ok(())
    }
}

/// One recorded outer iteration: the state the step started from, the
/// backtracking exponent, and the inner-solver effort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub eps: f64,
    pub c: f64,
    pub psi: f64,
    pub e_hat_norm: f64,
    pub ell: usize,
    pub bicg_iters: usize,
    /// True residual of the reduced Newton system for the accepted step.
    pub newton_residual_norm: f64,
    /// Norm of the reduced right-hand side, ‖E + ∇_εÊ·Δε‖.
    pub newton_rhs_norm: f64,
}

/// Outcome of a solve: final iterate, per-iteration trace, and the
/// second-order diagnostics at exit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iters: usize,
    pub total_bicg_iters: usize,
    pub final_eps: f64,
    pub final_c: f64,
    pub final_mu: Vec<f64>,
    pub final_w: Vec<f64>,
    /// ‖Ê‖₂, |ε| and ‖E‖₂ at exit.
    pub e_hat_norm: f64,
    pub eps_norm: f64,
    pub e_norm: f64,
    pub diagnostics: SecondOrderReport,
    pub trace: Vec<TraceRow>,
    pub wall_time_secs: f64,
    pub jacobian_mode: JacobianMode,
}

impl SolveReport {
    pub fn final_iterate(&self) -> Iterate {
        Iterate {
            eps: self.final_eps,
            c: self.final_c,
            mu: DVector::from_column_slice(&self.final_mu),
            w: DVector::from_column_slice(&self.final_w),
        }
    }

    /// Reconstructed multiplier of the bound constraint, λ* = -μ*ᵀg(w*).
    pub fn lambda_star(&self) -> f64 {
        self.diagnostics.lambda_star
    }

    /// Writes the trace as CSV rows `k, eps, C, psi, E_hat_norm, ell, bicg_iters`.
    pub fn write_trace_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "k,eps,C,psi,E_hat_norm,ell,bicg_iters")?;
        for row in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.k, row.eps, row.c, row.psi, row.e_hat_norm, row.ell, row.bicg_iters
            )?;
        }
        Ok(())
    }
}

/// `η_k = min{1, r̂‖Ê‖^τ}` and `ζ_k = r·min{1, ‖Ê‖^{1+τ}}`.
pub fn forcing_terms(e_hat_norm: f64, cfg: &SolverConfig) -> (f64, f64) {
    let eta = 1.0f64.min(cfg.r_hat * e_hat_norm.powf(cfg.tau));
    let zeta = cfg.r * 1.0f64.min(e_hat_norm.powf(1.0 + cfg.tau));
    (eta, zeta)
}

pub(crate) struct StepOutcome {
    pub direction: Direction,
    pub bicg_iters: usize,
    pub residual_norm: f64,
    pub rhs_norm: f64,
}

/// Computes the inexact Newton direction at the current iterate. Δε is
/// fixed analytically; (ΔC, Δμ, Δw) solve the reduced system by Bi-CG,
/// falling back to explicit assembly and a dense solve when the Krylov
/// iteration cannot meet the residual tests.
pub(crate) fn newton_step(
    fp: &FoldedProblem,
    eval: &ModelEval,
    e: &DVector<f64>,
    it: &Iterate,
    cfg: &SolverConfig,
    k: usize,
) -> Result<StepOutcome, SolverError> {
    let e_norm = e.norm();
    let (eta, zeta) = forcing_terms(e_norm, cfg);
    let delta_eps = -it.eps + zeta * cfg.eps_hat;
    let blocks = JacobianBlocks::build(fp, eval, it, cfg.kappa, cfg.jacobian_mode);
    let rhs = blocks.reduced_rhs(e, delta_eps);
    let rhs_norm = rhs.norm();
    let dim = fp.dim();

    // Both residual tests must hold on the true residual.
    let target = (eta.min(cfg.eta_hat) * e_norm).max(0.0);

    let mut krylov = KrylovConfig::for_size(2 * dim + 1);
    krylov.rel_tol = if rhs_norm > 0.0 {
        target / rhs_norm
    } else {
        0.0
    };
    let res = bicg_solve(
        |d| blocks.apply_reduced(d),
        |d| blocks.apply_reduced_t(d),
        &rhs,
        &krylov,
    );

    let (solution, bicg_iters) =
        if res.status == KrylovStatus::Converged && res.residual_norm <= target {
            (res.solution, res.iters)
        } else {
            // Dense fallback keeps the outer loop going; in implicit mode this
            // assembles the blocks it avoided so far.
            let m = blocks.assemble_reduced();
            match m.lu().solve(&rhs) {
                Some(sol) => (sol, res.iters),
                None => return Err(SolverError::SingularSystem {
                    k,
                    msg:
                        "dense fallback found the reduced matrix singular (z <= -kappa*eps region)"
                            .into(),
                }),
            }
        };

    let residual_norm = (&rhs - blocks.apply_reduced(&solution)).norm();
    if residual_norm > target && residual_norm > 1e-12 * rhs_norm.max(1.0) {
        return Err(SolverError::SingularSystem {
            k,
            msg: format!(
                "no solve met the residual tests: ‖R‖ = {residual_norm:.3e} > {target:.3e}"
            ),
        });
    }

    Ok(StepOutcome {
        direction: Direction {
            d_eps: delta_eps,
            d_c: solution[0],
            d_mu: solution.rows(1, dim).into_owned(),
            d_w: solution.rows(1 + dim, dim).into_owned(),
        },
        bicg_iters,
        residual_norm,
        rhs_norm,
    })
}

/// Backtracks from ℓ = 0 until the merit decrease test holds; errors past
/// [`LINE_SEARCH_CAP`].
pub(crate) fn line_search(
    fp: &FoldedProblem,
    it: &Iterate,
    direction: &Direction,
    psi0: f64,
    cfg: &SolverConfig,
    k: usize,
) -> Result<(usize, Iterate, f64), SolverError> {
    let delta = cfg.delta();
    let mut step = 1.0;
    for ell in 0..=LINE_SEARCH_CAP {
        let trial = it.stepped(direction, step);
        let psi_trial = crate::smoothing::e_hat(fp, &trial, cfg.kappa).norm_squared();
        if psi_trial <= (1.0 - 2.0 * cfg.sigma * (1.0 - delta) * step) * psi0 {
            return Ok((ell, trial, psi_trial));
        }
        step *= cfg.rho;
    }
    Err(SolverError::LineSearchStall {
        k,
        psi: psi0,
        cap: LINE_SEARCH_CAP,
    })
}

fn non_finite_block(e: &DVector<f64>, dim: usize) -> &'static str {
    for (i, v) in e.iter().enumerate() {
        if !v.is_finite() {
            return match i {
                0 => "epsilon",
                1 => "complementarity",
                i if i < 2 + dim => "multiplier stationarity",
                _ => "constraint",
            };
        }
    }
    "none"
}

/// Runs the smoothing Newton method until ‖Ê‖₂ ≤ `cfg.tol` or
/// `cfg.max_outer` iterations. C is never projected; complementarity is
/// maintained through the Huber block itself.
pub fn solve(fp: &FoldedProblem, cfg: &SolverConfig) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let dim = fp.dim();
    let mut it = Iterate::start(cfg.eps0, cfg.c0, dim);
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut total_bicg = 0usize;
    let mut converged = false;

    for k in 0..cfg.max_outer {
        let eval = fp.eval(&it.w);
        let e = e_hat_with_eval(fp, &eval, &it, cfg.kappa);
        let e_norm = e.norm();
        if !e_norm.is_finite() {
            return Err(SolverError::NonFinite {
                block: non_finite_block(&e, dim),
                k,
            });
        }
        if e_norm <= cfg.tol {
            converged = true;
            break;
        }

        let step = newton_step(fp, &eval, &e, &it, cfg, k)?;
        let psi0 = e_norm * e_norm;
        let (ell, next, _psi_next) = line_search(fp, &it, &step.direction, psi0, cfg, k)?;

        trace.push(TraceRow {
            k,
            eps: it.eps,
            c: it.c,
            psi: psi0,
            e_hat_norm: e_norm,
            ell,
            bicg_iters: step.bicg_iters,
            newton_residual_norm: step.residual_norm,
            newton_rhs_norm: step.rhs_norm,
        });
        total_bicg += step.bicg_iters;
        it = next;
    }

    if !converged {
        let e = crate::smoothing::e_hat(fp, &it, cfg.kappa);
        converged = e.norm() <= cfg.tol;
    }

    let e_final = crate::smoothing::e_hat(fp, &it, cfg.kappa);
    let e_hat_norm = e_final.norm();
    let eps_norm = it.eps.abs();
    let e_norm = e_final.rows(1, 2 * dim + 1).norm();
    let diagnostics = classify(fp, &it, cfg.kappa, cfg.jacobian_mode, 1e-8);

    Ok(SolveReport {
        converged,
        outer_iters: trace.len(),
        total_bicg_iters: total_bicg,
        final_eps: it.eps,
        final_c: it.c,
        final_mu: it.mu.as_slice().to_vec(),
        final_w: it.w.as_slice().to_vec(),
        e_hat_norm,
        eps_norm,
        e_norm,
        diagnostics,
        trace,
        wall_time_secs: start.elapsed().as_secs_f64(),
        jacobian_mode: cfg.jacobian_mode,
    })
}
