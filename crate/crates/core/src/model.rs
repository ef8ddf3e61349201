//! Fold-structured block operators for the single-level program.
//!
//! For each fold j the validation rows enter through `A^(j)` (row i is
//! `ȳ_i x̄_iᵀ`) and the training columns through `X^(j)` (column i is
//! `x̂_i`) with labels `ŷ^(j)`. All model quantities are block-local:
//! the full matrices A and X are block diagonal and never materialized.
//!
//! With margins `a = A w` and `t = Xᵀ w`,
//!
//! - `f(w) = Σ log(1 + e^{-a_i})`, `∇f(w) = -Aᵀ s(w)`, `s_i = (1 + e^{a_i})^{-1}`,
//! - `g(w) = ½ X (h_X(w) - ŷ)`, `h_i = (1 - e^{-t_i}) / (1 + e^{-t_i})`,
//! - `∇g(w) = X Diag(u(w)) Xᵀ`, `u_i = (2 + e^{-t_i} + e^{t_i})^{-1}`,
//! - `p_i = e^{a_i} / (1 + e^{a_i})²` and `q_i = u'(t_i)` are the curvature
//!   diagonals of the Lagrangian Hessian block.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dataio::{Dataset, SplitPlan};
use crate::num;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("inconsistent block shapes: {0}")]
    BadShape(String),
}

/// The T-fold block structure of the cross-validation program.
#[derive(Debug, Clone)]
pub struct FoldedProblem {
    t_folds: usize,
    n: usize,
    m1: usize,
    m2: usize,
    a_blocks: Vec<DMatrix<f64>>,
    x_blocks: Vec<DMatrix<f64>>,
    yhat_blocks: Vec<DVector<f64>>,
}

impl FoldedProblem {
    /// Builds the per-fold blocks from a dataset and a split plan: fold j's
    /// validation set is `plan.folds[j]`, its training set the union of the
    /// other folds in ascending fold order.
    pub fn assemble(ds: &Dataset, plan: &SplitPlan) -> Self {
        let t = plan.t_folds();
        let n = ds.n_features();
        let m1 = plan.m1();
        let m2 = plan.m2();

        let mut a_blocks = Vec::with_capacity(t);
        let mut x_blocks = Vec::with_capacity(t);
        let mut yhat_blocks = Vec::with_capacity(t);
        for j in 0..t {
            a_blocks.push(validation_block(ds, &plan.folds[j]));
            let train: Vec<usize> = (0..t)
                .filter(|&k| k != j)
                .flat_map(|k| plan.folds[k].iter().copied())
                .collect();
            let (x, yhat) = training_block(ds, &train);
            debug_assert_eq!(x.ncols(), m2);
            x_blocks.push(x);
            yhat_blocks.push(yhat);
        }
        Self {
            t_folds: t,
            n,
            m1,
            m2,
            a_blocks,
            x_blocks,
            yhat_blocks,
        }
    }

    /// The single-fold problem over the whole cross-validation pool: used
    /// for retraining the final classifier after C has been selected.
    pub fn assemble_full(ds: &Dataset, plan: &SplitPlan) -> Self {
        let all = plan.cv_indices();
        let a = validation_block(ds, &all);
        let (x, yhat) = training_block(ds, &all);
        Self {
            t_folds: 1,
            n: ds.n_features(),
            m1: all.len(),
            m2: all.len(),
            a_blocks: vec![a],
            x_blocks: vec![x],
            yhat_blocks: vec![yhat],
        }
    }

    /// Builds a problem directly from blocks (one `A`, `X`, `ŷ` per fold).
    pub fn from_parts(
        a_blocks: Vec<DMatrix<f64>>,
        x_blocks: Vec<DMatrix<f64>>,
        yhat_blocks: Vec<DVector<f64>>,
    ) -> Result<Self, ModelError> {
        let t = a_blocks.len();
        if t == 0 || x_blocks.len() != t || yhat_blocks.len() != t {
            return Err(ModelError::BadShape(
                "need one (A, X, yhat) triple per fold".into(),
            ));
        }
        let m1 = a_blocks[0].nrows();
        let n = a_blocks[0].ncols();
        let m2 = x_blocks[0].ncols();
        for j in 0..t {
            if a_blocks[j].shape() != (m1, n) {
                return Err(ModelError::BadShape(format!("A block {j} is not {m1}x{n}")));
            }
            if x_blocks[j].shape() != (n, m2) {
                return Err(ModelError::BadShape(format!("X block {j} is not {n}x{m2}")));
            }
            if yhat_blocks[j].len() != m2 {
                return Err(ModelError::BadShape(format!(
                    "yhat block {j} is not length {m2}"
                )));
            }
            if yhat_blocks[j].iter().any(|&y| y != 1.0 && y != -1.0) {
                return Err(ModelError::BadShape(format!(
                    "yhat block {j} has labels outside ±1"
                )));
            }
        }
        Ok(Self {
            t_folds: t,
            n,
            m1,
            m2,
            a_blocks,
            x_blocks,
            yhat_blocks,
        })
    }

    pub fn t_folds(&self) -> usize {
        self.t_folds
    }

    /// Feature dimension n of a single fold's classifier.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    /// Length of the stacked variable w, T*n.
    pub fn dim(&self) -> usize {
        self.t_folds * self.n
    }

    /// Total validation rows T*m1.
    pub fn val_rows(&self) -> usize {
        self.t_folds * self.m1
    }

    /// Total training columns T*m2.
    pub fn train_cols(&self) -> usize {
        self.t_folds * self.m2
    }

    pub fn a_block(&self, j: usize) -> &DMatrix<f64> {
        &self.a_blocks[j]
    }

    pub fn x_block(&self, j: usize) -> &DMatrix<f64> {
        &self.x_blocks[j]
    }

    pub fn yhat_block(&self, j: usize) -> &DVector<f64> {
        &self.yhat_blocks[j]
    }

    /// Stacked training labels, length T*m2.
    pub fn yhat(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.train_cols());
        for j in 0..self.t_folds {
            out.rows_mut(j * self.m2, self.m2)
                .copy_from(&self.yhat_blocks[j]);
        }
        out
    }

    fn w_block<'a>(&self, w: &'a DVector<f64>, j: usize) -> nalgebra::DVectorView<'a, f64> {
        w.rows(j * self.n, self.n)
    }

    /// Evaluates and caches every w-dependent quantity.
    pub fn eval(&self, w: &DVector<f64>) -> ModelEval {
        assert_eq!(w.len(), self.dim(), "w must have length T*n");
        let mut aw = DVector::zeros(self.val_rows());
        let mut xw = DVector::zeros(self.train_cols());
        let mut g = DVector::zeros(self.dim());
        for j in 0..self.t_folds {
            let wj = self.w_block(w, j);
            aw.rows_mut(j * self.m1, self.m1)
                .gemv(1.0, &self.a_blocks[j], &wj, 0.0);
            xw.rows_mut(j * self.m2, self.m2)
                .gemv_tr(1.0, &self.x_blocks[j], &wj, 0.0);
        }
        let s = aw.map(|t| num::sigmoid(-t));
        let u = xw.map(num::sigmoid_prod);
        let h = xw.map(num::logistic_h);
        for j in 0..self.t_folds {
            let resid = 0.5 * (h.rows(j * self.m2, self.m2) - &self.yhat_blocks[j]);
            g.rows_mut(j * self.n, self.n)
                .gemv(1.0, &self.x_blocks[j], &resid, 0.0);
        }
        let f = aw.iter().map(|&t| num::log1p_exp(-t)).sum();
        ModelEval {
            aw,
            xw,
            s,
            u,
            h,
            g,
            f,
        }
    }

    /// Validation loss `f(w) = 1ᵀ log(1 + e^{-Aw})`.
    pub fn eval_f(&self, w: &DVector<f64>) -> f64 {
        self.eval(w).f
    }

    /// `∇f(w) = -Aᵀ s(w)` assembled fold by fold.
    pub fn grad_f(&self, eval: &ModelEval) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for j in 0..self.t_folds {
            let sj = eval.s.rows(j * self.m1, self.m1);
            out.rows_mut(j * self.n, self.n)
                .gemv_tr(-1.0, &self.a_blocks[j], &sj, 0.0);
        }
        out
    }

    pub fn grad_f_at(&self, w: &DVector<f64>) -> DVector<f64> {
        self.grad_f(&self.eval(w))
    }

    /// `g(w) = ½ X (h_X(w) - ŷ)`.
    pub fn eval_g(&self, w: &DVector<f64>) -> DVector<f64> {
        self.eval(w).g.clone()
    }

    /// Applies `∇g(w) = X Diag(u(w)) Xᵀ` to `d` without forming the matrix.
    pub fn grad_g_apply(&self, eval: &ModelEval, d: &DVector<f64>) -> DVector<f64> {
        assert_eq!(d.len(), self.dim());
        let mut out = DVector::zeros(self.dim());
        let mut xtd = DVector::zeros(self.m2);
        for j in 0..self.t_folds {
            let dj = d.rows(j * self.n, self.n);
            xtd.gemv_tr(1.0, &self.x_blocks[j], &dj, 0.0);
            xtd.component_mul_assign(&eval.u.rows(j * self.m2, self.m2));
            out.rows_mut(j * self.n, self.n)
                .gemv(1.0, &self.x_blocks[j], &xtd, 0.0);
        }
        out
    }

    /// Assembles `∇g(w)` as a dense block-diagonal T·n × T·n matrix.
    pub fn grad_g_matrix(&self, eval: &ModelEval) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for j in 0..self.t_folds {
            let uj = eval.u.rows(j * self.m2, self.m2);
            let mut scaled = self.x_blocks[j].clone();
            for (c, mut col) in scaled.column_iter_mut().enumerate() {
                col *= uj[c];
            }
            let block = &scaled * self.x_blocks[j].transpose();
            out.view_mut((j * self.n, j * self.n), (self.n, self.n))
                .copy_from(&block);
        }
        out
    }

    /// Residual of the stationarity constraints, `w + C g(w)`; zero exactly
    /// when every fold's training problem is solved for this C.
    pub fn nlp_residual(&self, c: f64, w: &DVector<f64>) -> DVector<f64> {
        w + c * self.eval(w).g
    }

    /// Cross-validation error `f(w) / (T m1)`; equals E_CV at a solution.
    pub fn upper_objective(&self, w: &DVector<f64>) -> f64 {
        self.upper_objective_eval(&self.eval(w))
    }

    pub fn upper_objective_eval(&self, eval: &ModelEval) -> f64 {
        eval.f / self.val_rows() as f64
    }

    /// Fold-j training objective `F(w_j) = ½‖w_j‖² + C Σ_i log(1 + e^{-ŷ_i x̂_iᵀ w_j})`.
    pub fn lower_objective(&self, j: usize, w_j: &DVector<f64>, c: f64) -> f64 {
        let xw = self.x_blocks[j].tr_mul(w_j);
        let loss: f64 = xw
            .iter()
            .zip(self.yhat_blocks[j].iter())
            .map(|(&t, &y)| num::log1p_exp(-y * t))
            .sum();
        0.5 * w_j.norm_squared() + c * loss
    }

    /// `∇F(w_j) = w_j + ½ C X_j (h(X_jᵀ w_j) - ŷ_j)`.
    pub fn lower_gradient(&self, j: usize, w_j: &DVector<f64>, c: f64) -> DVector<f64> {
        let xw = self.x_blocks[j].tr_mul(w_j);
        let resid = xw.zip_map(&self.yhat_blocks[j], |t, y| 0.5 * (num::logistic_h(t) - y));
        w_j + c * (&self.x_blocks[j] * resid)
    }

    /// `∇²F(w_j) = I + C X_j Diag(u(X_jᵀ w_j)) X_jᵀ`, dense n × n.
    pub fn lower_hessian(&self, j: usize, w_j: &DVector<f64>, c: f64) -> DMatrix<f64> {
        let xw = self.x_blocks[j].tr_mul(w_j);
        let mut scaled = self.x_blocks[j].clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= c * num::sigmoid_prod(xw[i]);
        }
        let mut hess = &scaled * self.x_blocks[j].transpose();
        for i in 0..self.n {
            hess[(i, i)] += 1.0;
        }
        hess
    }
}

fn validation_block(ds: &Dataset, indices: &[usize]) -> DMatrix<f64> {
    let n = ds.n_features();
    let mut a = DMatrix::zeros(indices.len(), n);
    for (row, &idx) in indices.iter().enumerate() {
        let y = ds.labels()[idx];
        for &(col, val) in ds.sample(idx) {
            a[(row, (col - 1) as usize)] = y * val;
        }
    }
    a
}

fn training_block(ds: &Dataset, indices: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let n = ds.n_features();
    let mut x = DMatrix::zeros(n, indices.len());
    let mut yhat = DVector::zeros(indices.len());
    for (col, &idx) in indices.iter().enumerate() {
        yhat[col] = ds.labels()[idx];
        for &(row, val) in ds.sample(idx) {
            x[((row - 1) as usize, col)] = val;
        }
    }
    (x, yhat)
}

/// Cached quantities at a fixed w: margins, `s`, `u`, `h_X`, `g`, and `f`.
#[derive(Debug, Clone)]
pub struct ModelEval {
    /// Validation margins A w, length T*m1.
    pub(crate) aw: DVector<f64>,
    /// Training margins Xᵀ w, length T*m2.
    pub(crate) xw: DVector<f64>,
    s: DVector<f64>,
    u: DVector<f64>,
    h: DVector<f64>,
    g: DVector<f64>,
    f: f64,
}

impl ModelEval {
    pub fn f(&self) -> f64 {
        self.f
    }

    /// `s(w)`, componentwise in (0, 1).
    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    /// `u(w)`, componentwise in (0, 1/4].
    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    /// `h_X(w)`, componentwise in (-1, 1).
    pub fn h_x(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    /// Curvature diagonals: `p` over validation rows, `q` over training
    /// columns. `p` has the same functional form as `u` (evaluated at the
    /// validation margins) and `q = u'` at the training margins.
    pub fn pq(&self) -> (DVector<f64>, DVector<f64>) {
        let p = self.aw.map(num::sigmoid_prod);
        let q = self.xw.map(num::sigmoid_prod_deriv);
        (p, q)
    }
}

/// `h_{x̂}(w)` as a scalar map: `(1 - e^{-t}) / (1 + e^{-t})` for the margin
/// `t = x̂ᵀw`, evaluated in the stable branch form. Exactly odd.
pub fn h_logistic(t: f64) -> f64 {
    num::logistic_h(t)
}
