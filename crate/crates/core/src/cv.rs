//! The end-to-end tuning pipeline: split, select C, post-process, score.
//!
//! After the smoothing Newton method (or grid search) picks C* on the
//! T-fold program, the hyperparameter is rescaled by T/(T-1) — the final
//! training set has T/(T-1) times the loss terms of a per-fold one — and a
//! single classifier ŵ is retrained on the whole cross-validation pool.
//! Reported metrics: E_CV (the upper objective at the solution) and E_t
//! (hold-out misclassification percentage, sign(0) counted as +1).

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{grid_search, solve_lower, BaselineError, GridRow, GridSpec};
use crate::dataio::{make_split, DataError, Dataset, SplitPlan};
use crate::model::FoldedProblem;
use crate::newton::{solve, SolveReport, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("selected C = {0} is negative; cannot retrain the final classifier")]
    NegativeC(f64),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("classifier has {classifier} features but the dataset has {data}")]
    FeatureMismatch { classifier: usize, data: usize },
}

/// Split bookkeeping carried into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub t_folds: usize,
    pub l1: usize,
    pub l2: usize,
    pub m1: usize,
    pub m2: usize,
    pub dropped: usize,
    pub seed: u64,
}

impl SplitSummary {
    fn new(plan: &SplitPlan) -> Self {
        Self {
            t_folds: plan.t_folds(),
            l1: plan.t_folds() * plan.m1() + plan.dropped.len(),
            l2: plan.test_indices.len(),
            m1: plan.m1(),
            m2: plan.m2(),
            dropped: plan.dropped.len(),
            seed: plan.seed,
        }
    }
}

/// Outcome of one tuning run (either backend).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    pub method: String,
    pub c_star: f64,
    /// C* rescaled by T/(T-1).
    pub c_hat: f64,
    /// Final classifier retrained on the whole pool with c_hat.
    pub w_hat: Vec<f64>,
    /// Hold-out misclassification percentage of w_hat.
    pub e_t: f64,
    /// Same metric for the classifier retrained with the unrescaled C*.
    pub e_t_unrescaled: f64,
    pub e_cv: f64,
    pub train_seconds: f64,
    pub split: SplitSummary,
    pub solve_report: Option<SolveReport>,
    pub grid_rows: Option<Vec<GridRow>>,
}

/// Rescales C* by T/(T-1) and retrains on the whole pool.
pub fn post_process(
    fp_full: &FoldedProblem,
    c_star: f64,
    t_folds: usize,
) -> Result<(f64, DVector<f64>), PipelineError> {
    if c_star < 0.0 {
        return Err(PipelineError::NegativeC(c_star));
    }
    let c_hat = c_star * t_folds as f64 / (t_folds as f64 - 1.0);
    let w_hat = solve_lower(fp_full, 0, c_hat, 1e-10)?;
    Ok((c_hat, w_hat))
}

/// Misclassification percentage of `w` over the given samples; sign(0)
/// counts as +1 so ties are deterministic.
pub fn test_error(w: &DVector<f64>, ds: &Dataset, indices: &[usize]) -> Result<f64, PipelineError> {
    if indices.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    if ds.n_features() > w.len() {
        return Err(PipelineError::FeatureMismatch {
            classifier: w.len(),
            data: ds.n_features(),
        });
    }
    let mut errors = 0usize;
    for &i in indices {
        let score: f64 = ds
            .sample(i)
            .iter()
            .map(|&(idx, val)| w[(idx - 1) as usize] * val)
            .sum();
        let pred = if score >= 0.0 { 1.0 } else { -1.0 };
        if pred != ds.labels()[i] {
            errors += 1;
        }
    }
    Ok(100.0 * errors as f64 / indices.len() as f64)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ds: &Dataset,
    plan: &SplitPlan,
    fp_full: &FoldedProblem,
    method: &str,
    c_star: f64,
    e_cv: f64,
    train_seconds: f64,
    solve_report: Option<SolveReport>,
    grid_rows: Option<Vec<GridRow>>,
) -> Result<TuneResult, PipelineError> {
    let (c_hat, w_hat) = post_process(fp_full, c_star, plan.t_folds())?;
    let e_t = test_error(&w_hat, ds, &plan.test_indices)?;
    let w_unrescaled = solve_lower(fp_full, 0, c_star, 1e-10)?;
    let e_t_unrescaled = test_error(&w_unrescaled, ds, &plan.test_indices)?;
    Ok(TuneResult {
        method: method.to_string(),
        c_star,
        c_hat,
        w_hat: w_hat.as_slice().to_vec(),
        e_t,
        e_t_unrescaled,
        e_cv,
        train_seconds,
        split: SplitSummary::new(plan),
        solve_report,
        grid_rows,
    })
}

/// The full pipeline with the smoothing Newton backend.
pub fn run_sncv(
    ds: &Dataset,
    t_folds: usize,
    l1: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<TuneResult, PipelineError> {
    let plan = make_split(ds, t_folds, l1, seed)?;
    let fp = FoldedProblem::assemble(ds, &plan);
    let fp_full = FoldedProblem::assemble_full(ds, &plan);

    let report = solve(&fp, cfg)?;
    let w_star = DVector::from_column_slice(&report.final_w);
    let e_cv = fp.upper_objective(&w_star);
    let method = match cfg.jacobian_mode {
        crate::jacobian::JacobianMode::Implicit => "imSN",
        crate::jacobian::JacobianMode::Explicit => "exSN",
    };
    let train_seconds = report.wall_time_secs;
    // A converged iterate can sit a residual-tolerance slop below C = 0
    // when the method lands on the boundary root (C* = 0, λ* > 0); snap it
    // to the feasible root before retraining.
    let c_star = if report.final_c < 0.0 && report.final_c.abs() <= report.e_hat_norm {
        0.0
    } else {
        report.final_c
    };
    finish(
        ds,
        &plan,
        &fp_full,
        method,
        c_star,
        e_cv,
        train_seconds,
        Some(report),
        None,
    )
}

/// The same pipeline with the grid-search backend.
pub fn run_gridcv(
    ds: &Dataset,
    t_folds: usize,
    l1: usize,
    seed: u64,
    grid: &GridSpec,
    lower_tol: f64,
) -> Result<TuneResult, PipelineError> {
    let plan = make_split(ds, t_folds, l1, seed)?;
    let fp = FoldedProblem::assemble(ds, &plan);
    let fp_full = FoldedProblem::assemble_full(ds, &plan);

    let start = Instant::now();
    let result = grid_search(&fp, grid, lower_tol)?;
    let train_seconds = start.elapsed().as_secs_f64();
    finish(
        ds,
        &plan,
        &fp_full,
        "GS",
        result.best_c,
        result.best_e_cv,
        train_seconds,
        None,
        Some(result.rows),
    )
}
