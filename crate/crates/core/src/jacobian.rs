//! The Jacobian of the smoothing system and the reduced Newton system.
//!
//! Ordered as (ε, C, μ, w), the Jacobian of `Ê` is
//!
//! ```text
//!        ⎡ 1        0          0       0       ⎤
//! J_Ê =  ⎢ κC-h₁    1+κε-h₂    h₂gᵀ    h₂μᵀ∇g  ⎥
//!        ⎢ 0        ∇gμ        P       α       ⎥
//!        ⎣ 0        g          0       P       ⎦
//! ```
//!
//! with `P = I + C∇g(w)` (symmetric positive definite for C ≥ 0) and
//! `α = (1/(T m1))AᵀDiag(p)A + C·X·Diag(Xᵀμ)·Diag(q)·Xᵀ` (symmetric). With
//! Δε fixed to `-ε + ζ_k ε̂`, eliminating the first row leaves the reduced
//! 3-block system solved by Bi-CG:
//!
//! ```text
//! ⎡ 1+κε-h₂  h₂gᵀ  h₂μᵀ∇g ⎤ ⎡ΔC⎤     ⎡ E_C + (κC-h₁)Δε ⎤
//! ⎢ ∇gμ      P     α      ⎥ ⎢Δμ⎥ = - ⎢ E_μ             ⎥
//! ⎣ g        0     P      ⎦ ⎣Δw⎦     ⎣ E_w             ⎦
//! ```
//!
//! Explicit mode assembles P and α once per outer iteration; implicit mode
//! re-applies the factored block products per matrix-vector product.

use nalgebra::{DMatrix, DVector};

use crate::model::{FoldedProblem, ModelEval};
use crate::smoothing::{huber, Iterate};

/// Whether P and α are assembled or applied matrix-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianMode {
    Implicit,
    Explicit,
}

impl std::fmt::Display for JacobianMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JacobianMode::Implicit => write!(f, "implicit"),
            JacobianMode::Explicit => write!(f, "explicit"),
        }
    }
}

/// All blocks of `J_Ê` frozen at one iterate.
pub struct JacobianBlocks<'a> {
    fp: &'a FoldedProblem,
    mode: JacobianMode,
    pub kappa: f64,
    pub eps: f64,
    pub c: f64,
    /// Huber partials at t = C - μᵀg(w).
    pub h1: f64,
    pub h2: f64,
    /// g(w).
    pub g_w: DVector<f64>,
    /// ∇g(w)·μ.
    pub dg_mu: DVector<f64>,
    u: DVector<f64>,
    p_diag: DVector<f64>,
    q_diag: DVector<f64>,
    /// Xᵀμ, stacked per fold (length T·m2).
    xtmu: DVector<f64>,
    p_mat: Option<DMatrix<f64>>,
    alpha_mat: Option<DMatrix<f64>>,
}

impl<'a> JacobianBlocks<'a> {
    /// Evaluates every block at the iterate. `it.eps > 0` gives the smooth
    /// derivatives; at ε = 0 the Huber selections are used.
    pub fn build(
        fp: &'a FoldedProblem,
        eval: &ModelEval,
        it: &Iterate,
        kappa: f64,
        mode: JacobianMode,
    ) -> Self {
        let (p_diag, q_diag) = eval.pq();
        let mut xtmu = DVector::zeros(fp.train_cols());
        for j in 0..fp.t_folds() {
            let mu_j = it.mu.rows(j * fp.n(), fp.n());
            xtmu.rows_mut(j * fp.m2(), fp.m2())
                .gemv_tr(1.0, fp.x_block(j), &mu_j, 0.0);
        }
        let dg_mu = fp.grad_g_apply(eval, &it.mu);
        let t = it.c - it.mu.dot(eval.g());
        let hub = huber(it.eps, t);

        let mut blocks = Self {
            fp,
            mode,
            kappa,
            eps: it.eps,
            c: it.c,
            h1: hub.d_eps,
            h2: hub.d_t,
            g_w: eval.g().clone(),
            dg_mu,
            u: eval.u().clone(),
            p_diag,
            q_diag,
            xtmu,
            p_mat: None,
            alpha_mat: None,
        };
        if mode == JacobianMode::Explicit {
            blocks.p_mat = Some(blocks.assemble_p());
            blocks.alpha_mat = Some(blocks.assemble_alpha());
        }
        blocks
    }

    pub fn mode(&self) -> JacobianMode {
        self.mode
    }

    /// Entry of the first Jacobian column in the E_C row, `κC - h₁`.
    pub fn kc_h1(&self) -> f64 {
        self.kappa * self.c - self.h1
    }

    /// The scalar (ΔC, ΔC) block, `1 + κε - h₂`.
    pub fn m00(&self) -> f64 {
        1.0 + self.kappa * self.eps - self.h2
    }

    fn dim(&self) -> usize {
        self.fp.dim()
    }

    /// `P d = d + C ∇g(w) d`.
    pub fn apply_p(&self, d: &DVector<f64>) -> DVector<f64> {
        if let Some(p) = &self.p_mat {
            p * d
        } else {
            let fp = self.fp;
            let mut out = d.clone();
            let mut xtd = DVector::zeros(fp.m2());
            for j in 0..fp.t_folds() {
                let dj = d.rows(j * fp.n(), fp.n());
                xtd.gemv_tr(1.0, fp.x_block(j), &dj, 0.0);
                xtd.component_mul_assign(&self.u.rows(j * fp.m2(), fp.m2()));
                out.rows_mut(j * fp.n(), fp.n())
                    .gemv(self.c, fp.x_block(j), &xtd, 1.0);
            }
            out
        }
    }

    /// `α d`, the (w,w) Lagrangian Hessian block applied to d.
    pub fn apply_alpha(&self, d: &DVector<f64>) -> DVector<f64> {
        if let Some(alpha) = &self.alpha_mat {
            alpha * d
        } else {
            let fp = self.fp;
            let scale = 1.0 / fp.val_rows() as f64;
            let mut out = DVector::zeros(self.dim());
            let mut ad = DVector::zeros(fp.m1());
            let mut xtd = DVector::zeros(fp.m2());
            for j in 0..fp.t_folds() {
                let dj = d.rows(j * fp.n(), fp.n());
                ad.gemv(1.0, fp.a_block(j), &dj, 0.0);
                ad.component_mul_assign(&self.p_diag.rows(j * fp.m1(), fp.m1()));
                let mut out_j = out.rows_mut(j * fp.n(), fp.n());
                out_j.gemv_tr(scale, fp.a_block(j), &ad, 0.0);

                xtd.gemv_tr(1.0, fp.x_block(j), &dj, 0.0);
                xtd.component_mul_assign(&self.xtmu.rows(j * fp.m2(), fp.m2()));
                xtd.component_mul_assign(&self.q_diag.rows(j * fp.m2(), fp.m2()));
                out_j.gemv(self.c, fp.x_block(j), &xtd, 1.0);
            }
            out
        }
    }

    /// Assembles P as a dense block-diagonal matrix.
    pub fn assemble_p(&self) -> DMatrix<f64> {
        if let Some(p) = &self.p_mat {
            return p.clone();
        }
        let fp = self.fp;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for j in 0..fp.t_folds() {
            let mut scaled = fp.x_block(j).clone();
            for (i, mut col) in scaled.column_iter_mut().enumerate() {
                col *= self.c * self.u[j * fp.m2() + i];
            }
            let mut block = &scaled * fp.x_block(j).transpose();
            for i in 0..fp.n() {
                block[(i, i)] += 1.0;
            }
            out.view_mut((j * fp.n(), j * fp.n()), (fp.n(), fp.n()))
                .copy_from(&block);
        }
        out
    }

    /// Assembles α as a dense block-diagonal matrix.
    pub fn assemble_alpha(&self) -> DMatrix<f64> {
        if let Some(alpha) = &self.alpha_mat {
            return alpha.clone();
        }
        let fp = self.fp;
        let scale = 1.0 / fp.val_rows() as f64;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for j in 0..fp.t_folds() {
            let mut a_scaled = fp.a_block(j).clone();
            for (r, mut row) in a_scaled.row_iter_mut().enumerate() {
                row *= self.p_diag[j * fp.m1() + r];
            }
            let mut block = scale * fp.a_block(j).transpose() * a_scaled;

            let mut x_scaled = fp.x_block(j).clone();
            for (i, mut col) in x_scaled.column_iter_mut().enumerate() {
                let k = j * fp.m2() + i;
                col *= self.c * self.xtmu[k] * self.q_diag[k];
            }
            block += &x_scaled * fp.x_block(j).transpose();
            out.view_mut((j * fp.n(), j * fp.n()), (fp.n(), fp.n()))
                .copy_from(&block);
        }
        out
    }

    /// Applies the full Jacobian to `[Δε; ΔC; Δμ; Δw]` (length 2·T·n + 2).
    pub fn apply_full(&self, d: &DVector<f64>) -> DVector<f64> {
        let dim = self.dim();
        assert_eq!(d.len(), 2 * dim + 2, "dimension mismatch");
        let d_eps = d[0];
        let d_c = d[1];
        let d_mu = d.rows(2, dim).into_owned();
        let d_w = d.rows(2 + dim, dim).into_owned();

        let mut out = DVector::zeros(2 * dim + 2);
        out[0] = d_eps;
        out[1] = self.kc_h1() * d_eps
            + self.m00() * d_c
            + self.h2 * self.g_w.dot(&d_mu)
            + self.h2 * self.dg_mu.dot(&d_w);
        let row_mu = d_c * &self.dg_mu + self.apply_p(&d_mu) + self.apply_alpha(&d_w);
        out.rows_mut(2, dim).copy_from(&row_mu);
        let row_w = d_c * &self.g_w + self.apply_p(&d_w);
        out.rows_mut(2 + dim, dim).copy_from(&row_w);
        out
    }

    /// Applies the reduced matrix M to `[ΔC; Δμ; Δw]` (length 2·T·n + 1).
    pub fn apply_reduced(&self, d: &DVector<f64>) -> DVector<f64> {
        let dim = self.dim();
        assert_eq!(d.len(), 2 * dim + 1, "dimension mismatch");
        let d_c = d[0];
        let d_mu = d.rows(1, dim).into_owned();
        let d_w = d.rows(1 + dim, dim).into_owned();

        let mut out = DVector::zeros(2 * dim + 1);
        out[0] = self.m00() * d_c + self.h2 * self.g_w.dot(&d_mu) + self.h2 * self.dg_mu.dot(&d_w);
        out.rows_mut(1, dim)
            .copy_from(&(d_c * &self.dg_mu + self.apply_p(&d_mu) + self.apply_alpha(&d_w)));
        out.rows_mut(1 + dim, dim)
            .copy_from(&(d_c * &self.g_w + self.apply_p(&d_w)));
        out
    }

    /// Applies Mᵀ (P and α are symmetric; only the border transposes).
    pub fn apply_reduced_t(&self, d: &DVector<f64>) -> DVector<f64> {
        let dim = self.dim();
        assert_eq!(d.len(), 2 * dim + 1, "dimension mismatch");
        let d_c = d[0];
        let d_mu = d.rows(1, dim).into_owned();
        let d_w = d.rows(1 + dim, dim).into_owned();

        let mut out = DVector::zeros(2 * dim + 1);
        out[0] = self.m00() * d_c + self.dg_mu.dot(&d_mu) + self.g_w.dot(&d_w);
        out.rows_mut(1, dim)
            .copy_from(&(self.h2 * d_c * &self.g_w + self.apply_p(&d_mu)));
        out.rows_mut(1 + dim, dim).copy_from(
            &(self.h2 * d_c * &self.dg_mu + self.apply_alpha(&d_mu) + self.apply_p(&d_w)),
        );
        out
    }

    /// Assembles the reduced matrix densely (used for the direct-solve
    /// fallback and for spectral checks).
    pub fn assemble_reduced(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let p = self.assemble_p();
        let alpha = self.assemble_alpha();
        let mut m = DMatrix::zeros(2 * dim + 1, 2 * dim + 1);
        m[(0, 0)] = self.m00();
        for i in 0..dim {
            m[(0, 1 + i)] = self.h2 * self.g_w[i];
            m[(0, 1 + dim + i)] = self.h2 * self.dg_mu[i];
            m[(1 + i, 0)] = self.dg_mu[i];
            m[(1 + dim + i, 0)] = self.g_w[i];
        }
        m.view_mut((1, 1), (dim, dim)).copy_from(&p);
        m.view_mut((1, 1 + dim), (dim, dim)).copy_from(&alpha);
        m.view_mut((1 + dim, 1 + dim), (dim, dim)).copy_from(&p);
        m
    }

    /// Right-hand side of the reduced system,
    /// `-[E_C + (κC - h₁)Δε; E_μ; E_w]`, from the current Ê and the fixed
    /// Δε = -ε + ζ_k ε̂.
    pub fn reduced_rhs(&self, e_hat: &DVector<f64>, delta_eps: f64) -> DVector<f64> {
        let dim = self.dim();
        assert_eq!(e_hat.len(), 2 * dim + 2);
        let mut rhs = DVector::zeros(2 * dim + 1);
        rhs[0] = -(e_hat[1] + self.kc_h1() * delta_eps);
        for i in 0..2 * dim {
            rhs[1 + i] = -e_hat[2 + i];
        }
        rhs
    }
}
