//! End-to-end pipeline behavior on synthetic datasets.

mod common;

use nalgebra::DVector;
use svctune::baselines::GridSpec;
use svctune::cv::{run_gridcv, run_sncv};
use svctune::dataio::make_split;
use svctune::jacobian::JacobianMode;
use svctune::model::FoldedProblem;
use svctune::newton::SolverConfig;
use svctune::synth::two_gaussians;

fn overlapping_dataset(seed: u64) -> svctune::dataio::Dataset {
    two_gaussians(240, 4, 1.5, 0.15, seed)
}

#[test]
fn sncv_converges_and_certifies_on_synthetic_data() {
    let ds = overlapping_dataset(42);
    let cfg = SolverConfig::default();
    let res = run_sncv(&ds, 3, 180, 7, &cfg).expect("pipeline runs");
    let report = res.solve_report.as_ref().unwrap();
    assert!(report.converged);
    assert!(report.e_hat_norm <= cfg.tol);
    assert!(res.c_star > 0.0);
    assert!(report.diagnostics.z_star > 0.0);
    assert_eq!(
        report.diagnostics.verdict,
        "strict local minimizer (case i)"
    );
    assert!(res.e_cv >= 0.0);
    assert!((0.0..=100.0).contains(&res.e_t));
    // The blobs overlap with 15% label noise: the classifier should be a
    // lot better than chance but cannot be perfect.
    assert!(res.e_t < 45.0, "E_t = {}", res.e_t);
    assert!(res.e_t > 0.0, "perfect separation is impossible here");
}

#[test]
fn implicit_and_explicit_match_through_the_full_pipeline() {
    let ds = overlapping_dataset(43);
    let mut cfg = SolverConfig::default();
    cfg.jacobian_mode = JacobianMode::Implicit;
    let im = run_sncv(&ds, 3, 180, 3, &cfg).unwrap();
    cfg.jacobian_mode = JacobianMode::Explicit;
    let ex = run_sncv(&ds, 3, 180, 3, &cfg).unwrap();
    assert!(im.solve_report.as_ref().unwrap().converged);
    assert!(ex.solve_report.as_ref().unwrap().converged);
    assert!(
        (im.c_star - ex.c_star).abs() <= 1e-3,
        "imSN C* = {}, exSN C* = {}",
        im.c_star,
        ex.c_star
    );
}

#[test]
fn sn_solution_is_competitive_with_grid_search() {
    let ds = overlapping_dataset(44);
    let sn = run_sncv(&ds, 3, 180, 11, &SolverConfig::default()).unwrap();
    let gs = run_gridcv(&ds, 3, 180, 11, &GridSpec::default_grid(), 1e-10).unwrap();
    // The smoothing Newton solution may sit between grid points; it must
    // be at least close to the best grid value in CV error.
    assert!(
        sn.e_cv <= gs.e_cv + 0.05,
        "SN E_CV = {} vs grid best {} at C = {}",
        sn.e_cv,
        gs.e_cv,
        gs.c_star
    );
    // Same comparison through the independent route: retrain the folds at
    // SN's C* with the lower-level solver and evaluate the CV error there.
    let plan = make_split(&ds, 3, 180, 11).unwrap();
    let fp = FoldedProblem::assemble(&ds, &plan);
    let w_lower = svctune::baselines::solve_all_lower(&fp, sn.c_star, 1e-10).unwrap();
    let e_cv_lower = fp.upper_objective(&w_lower);
    assert!(
        e_cv_lower <= gs.e_cv + 0.05,
        "fold-solver E_CV at C* = {} is {} vs grid best {}",
        sn.c_star,
        e_cv_lower,
        gs.e_cv
    );
}

#[test]
fn upper_objective_at_solver_iterate_matches_report() {
    let ds = overlapping_dataset(45);
    let res = run_sncv(&ds, 3, 180, 5, &SolverConfig::default()).unwrap();
    let plan = make_split(&ds, 3, 180, 5).unwrap();
    let fp = FoldedProblem::assemble(&ds, &plan);
    let report = res.solve_report.as_ref().unwrap();
    let w = DVector::from_column_slice(&report.final_w);
    assert_eq!(res.e_cv, fp.upper_objective(&w));
}

#[test]
fn lambda_matches_eliminated_multiplier() {
    // λ* = -μ*ᵀg(w*) is reconstructed for reporting; check the identity
    // against a direct evaluation.
    let ds = overlapping_dataset(46);
    let res = run_sncv(&ds, 3, 180, 9, &SolverConfig::default()).unwrap();
    let report = res.solve_report.as_ref().unwrap();
    let plan = make_split(&ds, 3, 180, 9).unwrap();
    let fp = FoldedProblem::assemble(&ds, &plan);
    let w = DVector::from_column_slice(&report.final_w);
    let mu = DVector::from_column_slice(&report.final_mu);
    let lambda = -mu.dot(fp.eval(&w).g());
    assert!((report.lambda_star() - lambda).abs() <= 1e-12);
}

#[test]
fn trace_merit_is_monotone_with_the_logged_factors() {
    let ds = overlapping_dataset(47);
    let cfg = SolverConfig::default();
    let res = run_sncv(&ds, 3, 180, 13, &cfg).unwrap();
    let report = res.solve_report.as_ref().unwrap();
    let delta = cfg.delta();
    let mut merits: Vec<(f64, usize)> = report.trace.iter().map(|r| (r.psi, r.ell)).collect();
    merits.push((report.e_hat_norm * report.e_hat_norm, 0));
    for pair in merits.windows(2) {
        let bound =
            (1.0 - 2.0 * cfg.sigma * (1.0 - delta) * cfg.rho.powi(pair[0].1 as i32)) * pair[0].0;
        assert!(pair[1].0 <= bound * (1.0 + 1e-12));
    }
}
