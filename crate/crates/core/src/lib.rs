//! Hyperparameter selection for logistic-loss support vector classification.
//!
//! The regularization constant `C` of a logistic-loss SVC is chosen by
//! minimizing the T-fold cross-validation error. The nested program is
//! collapsed into a single-level NLP through the stationarity conditions of
//! the per-fold training problems, and the resulting KKT system (one
//! complementarity pair plus smooth equations) is solved by a squared
//! smoothing Newton method: Huber smoothing of the plus function, inexact
//! Newton steps through a bi-conjugate-gradient inner solver, and an
//! Armijo-type line search on the squared residual merit.
//!
//! The crate ships:
//!
//! - [`dataio`] — LIBSVM-format parsing and deterministic train/test + fold
//!   splitting,
//! - [`model`] — the fold-structured block operators and every model
//!   quantity (losses, gradients, curvature diagonals),
//! - [`smoothing`] — the Huber function, the nonsmooth KKT residual and its
//!   smoothed counterpart,
//! - [`jacobian`] — explicit and matrix-free forms of the smoothing-system
//!   Jacobian and the reduced Newton system,
//! - [`bicg`] — a bi-conjugate-gradient solver for the (nonsymmetric)
//!   reduced system,
//! - [`newton`] — the smoothing Newton outer loop,
//! - [`diagnostics`] — second-order optimality certificates at the solution,
//! - [`baselines`] — the per-fold training solver and a grid-search baseline,
//! - [`cv`] — the end-to-end tuning pipeline (split, solve, post-process,
//!   score),
//! - [`synth`] — small synthetic dataset generators for demos and tests.
//!
//! The `svctune` binary exposes the pipeline as `tune`, `grid`, `eval` and
//! `trace` subcommands.

pub mod baselines;
pub mod bicg;
pub mod cli;
pub mod cv;
pub mod dataio;
pub mod diagnostics;
pub mod jacobian;
pub mod model;
pub mod newton;
pub(crate) mod num;
pub mod smoothing;
pub mod synth;

#[cfg(test)]
pub(crate) mod testkit;

pub use dataio::{Dataset, SplitPlan};
pub use model::{FoldedProblem, ModelEval};
pub use newton::{SolveReport, SolverConfig};

/// Crate version string, recorded in run manifests and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
