//! C ABI for the tuning pipeline: opaque handles, error codes, and plain
//! C types so other languages can bind.
//!
//! Lifetime rules: everything returned as a pointer is owned by the caller
//! and must be released with the matching `_free` function. All functions
//! are panic-safe: a caught panic reports `SVCTUNE_PANIC` instead of
//! unwinding across the boundary.

#![allow(non_camel_case_types, clippy::missing_safety_doc)]

use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use svctune::baselines::GridSpec;
use svctune::cv::{run_gridcv, run_sncv, PipelineError, TuneResult};
use svctune::dataio::{parse_libsvm, DataError, Dataset};
use svctune::jacobian::JacobianMode;
use svctune::newton::SolverConfig;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum svctune_status {
    SVCTUNE_OK = 0,
    SVCTUNE_NULL_ARGUMENT = 1,
    SVCTUNE_IO_ERROR = 2,
    SVCTUNE_PARSE_ERROR = 3,
    SVCTUNE_BAD_SPLIT = 4,
    SVCTUNE_BAD_CONFIG = 5,
    SVCTUNE_SOLVER_FAILURE = 6,
    SVCTUNE_NO_CONVERGENCE = 7,
    SVCTUNE_BUFFER_TOO_SMALL = 8,
    SVCTUNE_PANIC = 9,
}

use svctune_status::*;

/// Opaque dataset handle.
pub struct svctune_dataset {
    inner: Dataset,
}

/// Opaque tuning-result handle.
pub struct svctune_result {
    inner: TuneResult,
}

fn status_of(err: &PipelineError) -> svctune_status {
    match err {
        PipelineError::Data(DataError::Io { .. }) => SVCTUNE_IO_ERROR,
        PipelineError::Data(DataError::BadSplit { .. }) => SVCTUNE_BAD_SPLIT,
        PipelineError::Data(_) => SVCTUNE_PARSE_ERROR,
        PipelineError::Solver(_) => SVCTUNE_SOLVER_FAILURE,
        _ => SVCTUNE_SOLVER_FAILURE,
    }
}

/// Human-readable description of a status code. Static storage; do not free.
#[no_mangle]
pub extern "C" fn svctune_status_message(status: svctune_status) -> *const c_char {
    let msg: &'static [u8] = match status {
        SVCTUNE_OK => b"ok\0",
        SVCTUNE_NULL_ARGUMENT => b"null argument\0",
        SVCTUNE_IO_ERROR => b"i/o error\0",
        SVCTUNE_PARSE_ERROR => b"dataset parse error\0",
        SVCTUNE_BAD_SPLIT => b"invalid split parameters\0",
        SVCTUNE_BAD_CONFIG => b"invalid solver configuration\0",
        SVCTUNE_SOLVER_FAILURE => b"solver failure\0",
        SVCTUNE_NO_CONVERGENCE => b"solver did not reach tolerance\0",
        SVCTUNE_BUFFER_TOO_SMALL => b"output buffer too small\0",
        SVCTUNE_PANIC => b"internal panic\0",
    };
    msg.as_ptr() as *const c_char
}

/// Library version as a NUL-terminated string owned by the caller; release
/// with [`svctune_string_free`].
#[no_mangle]
pub extern "C" fn svctune_version() -> *mut c_char {
    CString::new(svctune::VERSION)
        .expect("version has no NUL")
        .into_raw()
}

#[no_mangle]
pub unsafe extern "C" fn svctune_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a LIBSVM-format file into a dataset handle.
#[no_mangle]
pub unsafe extern "C" fn svctune_dataset_load(
    path: *const c_char,
    out: *mut *mut svctune_dataset,
) -> svctune_status {
    if path.is_null() || out.is_null() {
        return SVCTUNE_NULL_ARGUMENT;
    }
    *out = ptr::null_mut();
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => return SVCTUNE_PARSE_ERROR,
    };
    match catch_unwind(|| parse_libsvm(Path::new(path))) {
        Ok(Ok(ds)) => {
            *out = Box::into_raw(Box::new(svctune_dataset { inner: ds }));
            SVCTUNE_OK
        }
        Ok(Err(DataError::Io { .. })) => SVCTUNE_IO_ERROR,
        Ok(Err(_)) => SVCTUNE_PARSE_ERROR,
        Err(_) => SVCTUNE_PANIC,
    }
}

#[no_mangle]
pub unsafe extern "C" fn svctune_dataset_free(ds: *mut svctune_dataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

#[no_mangle]
pub unsafe extern "C" fn svctune_dataset_len(ds: *const svctune_dataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.len()
}

#[no_mangle]
pub unsafe extern "C" fn svctune_dataset_features(ds: *const svctune_dataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.n_features()
}

/// Solver options mirrored as a plain C struct. Zeroed fields fall back to
/// the library defaults via [`svctune_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct svctune_options {
    pub folds: usize,
    /// Size of the cross-validation pool; 0 means 3/4 of the dataset.
    pub train_size: usize,
    pub seed: u64,
    pub tol: c_double,
    pub max_outer: usize,
    /// 0 = implicit (matrix-free), 1 = explicit (assembled) Jacobian.
    pub explicit_jacobian: c_int,
    pub kappa: c_double,
    pub tau: c_double,
}

#[no_mangle]
pub extern "C" fn svctune_options_default() -> svctune_options {
    let cfg = SolverConfig::default();
    svctune_options {
        folds: 3,
        train_size: 0,
        seed: 20240101,
        tol: cfg.tol,
        max_outer: cfg.max_outer,
        explicit_jacobian: 0,
        kappa: cfg.kappa,
        tau: cfg.tau,
    }
}

fn solver_config(opts: &svctune_options) -> SolverConfig {
    SolverConfig {
        tol: opts.tol,
        max_outer: opts.max_outer,
        jacobian_mode: if opts.explicit_jacobian != 0 {
            JacobianMode::Explicit
        } else {
            JacobianMode::Implicit
        },
        kappa: opts.kappa,
        tau: opts.tau,
        ..SolverConfig::default()
    }
}

fn effective_l1(ds: &Dataset, opts: &svctune_options) -> usize {
    if opts.train_size == 0 {
        ds.len() * 3 / 4
    } else {
        opts.train_size
    }
}

/// Runs the smoothing Newton tuning pipeline. On success `*out` holds a
/// result handle; `SVCTUNE_NO_CONVERGENCE` still produces a handle with
/// the best iterate found.
#[no_mangle]
pub unsafe extern "C" fn svctune_tune(
    ds: *const svctune_dataset,
    opts: *const svctune_options,
    out: *mut *mut svctune_result,
) -> svctune_status {
    if ds.is_null() || opts.is_null() || out.is_null() {
        return SVCTUNE_NULL_ARGUMENT;
    }
    *out = ptr::null_mut();
    let dataset = &(*ds).inner;
    let opts = &*opts;
    let cfg = solver_config(opts);
    if cfg.validate().is_err() {
        return SVCTUNE_BAD_CONFIG;
    }
    let l1 = effective_l1(dataset, opts);
    let run = catch_unwind(AssertUnwindSafe(|| {
        run_sncv(dataset, opts.folds, l1, opts.seed, &cfg)
    }));
    match run {
        Ok(Ok(res)) => {
            let converged = res
                .solve_report
                .as_ref()
                .map(|r| r.converged)
                .unwrap_or(false);
            *out = Box::into_raw(Box::new(svctune_result { inner: res }));
            if converged {
                SVCTUNE_OK
            } else {
                SVCTUNE_NO_CONVERGENCE
            }
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => SVCTUNE_PANIC,
    }
}

/// Runs the grid-search pipeline over the standard 18-point grid, or over
/// `grid[0..grid_len]` when a grid is supplied.
#[no_mangle]
pub unsafe extern "C" fn svctune_grid(
    ds: *const svctune_dataset,
    opts: *const svctune_options,
    grid: *const c_double,
    grid_len: usize,
    out: *mut *mut svctune_result,
) -> svctune_status {
    if ds.is_null() || opts.is_null() || out.is_null() {
        return SVCTUNE_NULL_ARGUMENT;
    }
    *out = ptr::null_mut();
    let dataset = &(*ds).inner;
    let opts = &*opts;
    let spec = if grid.is_null() || grid_len == 0 {
        GridSpec::default_grid()
    } else {
        let values = std::slice::from_raw_parts(grid, grid_len).to_vec();
        match GridSpec::from_values(values) {
            Ok(spec) => spec,
            Err(_) => return SVCTUNE_BAD_CONFIG,
        }
    };
    let l1 = effective_l1(dataset, opts);
    let run = catch_unwind(AssertUnwindSafe(|| {
        run_gridcv(dataset, opts.folds, l1, opts.seed, &spec, 1e-10)
    }));
    match run {
        Ok(Ok(res)) => {
            *out = Box::into_raw(Box::new(svctune_result { inner: res }));
            SVCTUNE_OK
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => SVCTUNE_PANIC,
    }
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_free(res: *mut svctune_result) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_c_star(res: *const svctune_result) -> c_double {
    if res.is_null() {
        return f64::NAN;
    }
    (*res).inner.c_star
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_c_hat(res: *const svctune_result) -> c_double {
    if res.is_null() {
        return f64::NAN;
    }
    (*res).inner.c_hat
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_test_error(res: *const svctune_result) -> c_double {
    if res.is_null() {
        return f64::NAN;
    }
    (*res).inner.e_t
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_cv_error(res: *const svctune_result) -> c_double {
    if res.is_null() {
        return f64::NAN;
    }
    (*res).inner.e_cv
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_outer_iters(res: *const svctune_result) -> usize {
    if res.is_null() {
        return 0;
    }
    (*res)
        .inner
        .solve_report
        .as_ref()
        .map(|r| r.outer_iters)
        .unwrap_or(0)
}

#[no_mangle]
pub unsafe extern "C" fn svctune_result_z_star(res: *const svctune_result) -> c_double {
    if res.is_null() {
        return f64::NAN;
    }
    (*res)
        .inner
        .solve_report
        .as_ref()
        .map(|r| r.diagnostics.z_star)
        .unwrap_or(f64::NAN)
}

/// Number of entries in the final classifier.
#[no_mangle]
pub unsafe extern "C" fn svctune_result_w_len(res: *const svctune_result) -> usize {
    if res.is_null() {
        return 0;
    }
    (*res).inner.w_hat.len()
}

/// Copies the final classifier into `buf`; fails when `buf_len` is short.
#[no_mangle]
pub unsafe extern "C" fn svctune_result_w_hat(
    res: *const svctune_result,
    buf: *mut c_double,
    buf_len: usize,
) -> svctune_status {
    if res.is_null() || buf.is_null() {
        return SVCTUNE_NULL_ARGUMENT;
    }
    let w = &(*res).inner.w_hat;
    if buf_len < w.len() {
        return SVCTUNE_BUFFER_TOO_SMALL;
    }
    std::slice::from_raw_parts_mut(buf, w.len()).copy_from_slice(w);
    SVCTUNE_OK
}

/// Serializes the full result (report, trace, diagnostics) to JSON; owned
/// by the caller, release with [`svctune_string_free`].
#[no_mangle]
pub unsafe extern "C" fn svctune_result_to_json(res: *const svctune_result) -> *mut c_char {
    if res.is_null() {
        return ptr::null_mut();
    }
    match serde_json::to_string(&(*res).inner) {
        Ok(json) => CString::new(json)
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut()),
        Err(_) => ptr::null_mut(),
    }
}
