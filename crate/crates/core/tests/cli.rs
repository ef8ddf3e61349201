//! Behavior of the `svctune` binary: flags, outputs, exit codes.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use svctune::synth::two_gaussians;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svctune"))
}

fn write_dataset(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    let ds = two_gaussians(160, 3, 1.5, 0.15, seed);
    let path = dir.join(name);
    fs::write(&path, ds.to_libsvm_string()).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn tune_writes_all_outputs_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), "blobs.txt", 1);
    let out_dir = tmp.path().join("run");
    let out = bin()
        .args(["tune", "--data"])
        .arg(&data)
        .args([
            "--folds",
            "3",
            "--train-size",
            "120",
            "--seed",
            "7",
            "--jacobian",
            "implicit",
        ])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    for file in [
        "summary.csv",
        "report.json",
        "trace.csv",
        "classifier.json",
        "manifest.json",
    ] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("dataset,method,C,t,E_t,E_CV\n"));
    assert!(summary.contains("blobs,imSN,"));
    assert!(stdout(&out).contains("blobs,imSN,"));

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,eps,C,psi,E_hat_norm,ell,bicg_iters\n"));
    assert!(trace.lines().count() > 2);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "imSN");
    assert!(report["solve_report"]["converged"].as_bool().unwrap());
    assert!(
        report["solve_report"]["diagnostics"]["z_star"]
            .as_f64()
            .unwrap()
            > 0.0
    );
    // Both hold-out errors recorded (rescaled and unrescaled classifier).
    assert!(report["e_t"].is_number());
    assert!(report["e_t_unrescaled"].is_number());

    let classifier: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("classifier.json")).unwrap())
            .unwrap();
    assert_eq!(classifier["n"], 3);
    assert_eq!(classifier["w_hat"].as_array().unwrap().len(), 3);
    assert!(classifier["C_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_file_exits_one_and_names_the_path() {
    let out = bin()
        .args(["tune", "--data", "/no/such/dataset.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/dataset.txt"));
}

#[test]
fn tight_tolerance_trace_shows_superlinear_tail() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), "blobs.txt", 2);
    let out = bin()
        .args(["trace", "--data"])
        .arg(&data)
        .args([
            "--folds",
            "3",
            "--train-size",
            "120",
            "--seed",
            "3",
            "--tol",
            "1e-8",
            "--max-outer",
            "500",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let trace = stdout(&out);
    let norms: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(norms.len() >= 4, "trace too short: {trace}");
    // log ‖Ê‖ must fall steeply at the end; check the superlinear ratio on
    // the final recorded steps.
    let tail = &norms[norms.len() - 3..];
    for pair in tail.windows(2) {
        assert!(
            pair[1] <= 10.0 * pair[0].powf(1.2),
            "tail ratio violated: {:?}",
            &norms[norms.len().saturating_sub(6)..]
        );
    }
}

#[test]
fn eval_scores_a_saved_zero_classifier() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = two_gaussians(80, 2, 1.0, 0.1, 5);
    let data = tmp.path().join("test.txt");
    fs::write(&data, ds.to_libsvm_string()).unwrap();
    let neg_share =
        100.0 * ds.labels().iter().filter(|&&y| y < 0.0).count() as f64 / ds.len() as f64;

    let model = tmp.path().join("classifier.json");
    fs::write(
        &model,
        serde_json::json!({
            "C_hat": 0.0,
            "w_hat": [0.0, 0.0],
            "n": 2,
            "metadata": {
                "dataset": "zeros", "method": "imSN", "folds": 3,
                "train_size": 0, "seed": 0, "version": "0.1.0"
            }
        })
        .to_string(),
    )
    .unwrap();

    let out = bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let printed = stdout(&out);
    let value: f64 = printed
        .trim()
        .strip_prefix("E_t = ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (value - neg_share).abs() < 1e-9,
        "printed {printed}, expected {neg_share}"
    );
}

#[test]
fn grid_flags_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), "blobs.txt", 6);
    let out_dir = tmp.path().join("grid-run");
    let out = bin()
        .args(["grid", "--data"])
        .arg(&data)
        .args([
            "--folds",
            "3",
            "--train-size",
            "120",
            "--seed",
            "9",
            "--grid",
            "0.1,1,10",
        ])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let grid_csv = fs::read_to_string(out_dir.join("grid.csv")).unwrap();
    assert!(grid_csv.starts_with("C,E_CV,best\n"));
    assert_eq!(grid_csv.lines().count(), 4);
    assert_eq!(
        grid_csv.matches('*').count(),
        1,
        "exactly one best row: {grid_csv}"
    );
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.contains(",GS,"));

    // Default grid has 18 points.
    let out_dir2 = tmp.path().join("grid-default");
    let out = bin()
        .args(["grid", "--data"])
        .arg(&data)
        .args([
            "--folds",
            "3",
            "--train-size",
            "120",
            "--seed",
            "9",
            "--grid-default",
        ])
        .arg("--out")
        .arg(&out_dir2)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let grid_csv = fs::read_to_string(out_dir2.join("grid.csv")).unwrap();
    assert_eq!(grid_csv.lines().count(), 19);
}

#[test]
fn rerunning_a_manifest_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), "blobs.txt", 8);
    let mut dirs = Vec::new();
    for run in 0..2 {
        let out_dir = tmp.path().join(format!("run{run}"));
        let out = bin()
            .args(["tune", "--data"])
            .arg(&data)
            .args(["--folds", "3", "--train-size", "120", "--seed", "21"])
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        dirs.push(out_dir);
    }
    // Deterministic artifacts are byte-identical.
    for file in ["trace.csv", "classifier.json"] {
        let a = fs::read(dirs[0].join(file)).unwrap();
        let b = fs::read(dirs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }
    // Manifests agree except for the output directory they describe.
    let scrub_manifest = |path: &Path| -> serde_json::Value {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        v["out_dir"] = "".into();
        v
    };
    assert_eq!(
        scrub_manifest(&dirs[0].join("manifest.json")),
        scrub_manifest(&dirs[1].join("manifest.json"))
    );
    // Reports and summaries agree once the recorded wall time is removed.
    let scrub = |path: &Path| -> serde_json::Value {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        v["train_seconds"] = 0.into();
        v["solve_report"]["wall_time_secs"] = 0.into();
        v
    };
    assert_eq!(
        scrub(&dirs[0].join("report.json")),
        scrub(&dirs[1].join("report.json"))
    );
    let scrub_csv = |path: &Path| -> String {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|line| {
                let cols: Vec<&str> = line.split(',').collect();
                cols.iter()
                    .enumerate()
                    .filter(|(i, _)| *i != 3) // drop the t column
                    .map(|(_, c)| *c)
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        scrub_csv(&dirs[0].join("summary.csv")),
        scrub_csv(&dirs[1].join("summary.csv"))
    );
}

#[test]
fn nonconvergence_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), "blobs.txt", 10);
    // One outer iteration cannot reach the tolerance.
    let out = bin()
        .args(["tune", "--data"])
        .arg(&data)
        .args([
            "--folds",
            "3",
            "--train-size",
            "120",
            "--seed",
            "3",
            "--max-outer",
            "1",
            "--tol",
            "1e-10",
        ])
        .arg("--out")
        .arg(tmp.path().join("nc"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}
