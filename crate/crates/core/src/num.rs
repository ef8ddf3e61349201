//! Overflow-safe scalar kernels shared by the model and the baselines.
//!
//! Every function here avoids evaluating `exp(t)` for `t > 0` inside a
//! quotient; large margins would otherwise overflow long before the
//! surrounding algebra breaks down.

/// `log(1 + e^t)`, exact for both tails.
#[inline]
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + e^{-t})`.
#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `e^t / (1 + e^t)^2 = sigmoid(t) * (1 - sigmoid(t))`, an even function
/// with maximum 1/4 at t = 0.
#[inline]
pub(crate) fn sigmoid_prod(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// Derivative of [`sigmoid_prod`]; odd, zero at t = 0.
///
/// For t >= 0 this is `e^{-t}(e^{-t} - 1) / (1 + e^{-t})^3` evaluated
/// directly; the negative axis comes from oddness.
#[inline]
pub(crate) fn sigmoid_prod_deriv(t: f64) -> f64 {
    if t < 0.0 {
        -sigmoid_prod_deriv(-t)
    } else {
        let e = (-t).exp();
        let d = 1.0 + e;
        e * (e - 1.0) / (d * d * d)
    }
}

/// `(1 - e^{-t}) / (1 + e^{-t}) = tanh(t/2)`, evaluated in the branch that
/// keeps every exponential argument nonpositive. Exactly odd.
#[inline]
pub(crate) fn logistic_h(t: f64) -> f64 {
    if t < 0.0 {
        -logistic_h(-t)
    } else {
        let e = (-t).exp();
        (1.0 - e) / (1.0 + e)
    }
}
