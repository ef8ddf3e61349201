//! Command-line front end: `tune`, `grid`, `eval`, `trace`.
//!
//! Every run writes a manifest next to its outputs so the exact invocation
//! can be replayed. Exit codes: 0 on success/convergence, 2 when the
//! solver does not converge, 1 on input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::GridSpec;
use crate::cv::{run_gridcv, run_sncv, test_error, PipelineError, TuneResult};
use crate::dataio::{parse_libsvm, Dataset};
use crate::jacobian::JacobianMode;
use crate::newton::SolverConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "svctune",
    version = crate::VERSION,
    about = "Selects the regularization constant of a logistic-loss SVC by bilevel cross-validation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tune C with the smoothing Newton method and score the result.
    Tune(TuneArgs),
    /// Tune C by grid search over candidate values.
    Grid(GridArgs),
    /// Score a saved classifier on a LIBSVM file.
    Eval(EvalArgs),
    /// Emit per-iteration convergence data for a smoothing Newton run.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianArg {
    Implicit,
    Explicit,
}

impl From<JacobianArg> for JacobianMode {
    fn from(value: JacobianArg) -> Self {
        match value {
            JacobianArg::Implicit => JacobianMode::Implicit,
            JacobianArg::Explicit => JacobianMode::Explicit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// LIBSVM-format dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Fold count T.
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Size l1 of the cross-validation pool; the rest is held out.
    /// Defaults to 3/4 of the dataset.
    #[arg(long = "train-size")]
    pub train_size: Option<usize>,
    /// Seed for the one-shot shuffle behind the split.
    #[arg(long, default_value_t = 20240101)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Outer stopping tolerance on ‖Ê‖₂.
    #[arg(long, default_value_t = 0.1)]
    pub tol: f64,
    #[arg(long = "max-outer", default_value_t = 200)]
    pub max_outer: usize,
    #[arg(long, value_enum, default_value_t = JacobianArg::Implicit)]
    pub jacobian: JacobianArg,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.2)]
    pub tau: f64,
}

impl SolverArgs {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_outer: self.max_outer,
            jacobian_mode: self.jacobian.into(),
            kappa: self.kappa,
            tau: self.tau,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TuneArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory for summary.csv, report.json, trace.csv, classifier.json
    /// and manifest.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    /// Comma-separated candidate values, e.g. `--grid 0.1,1,10`.
    #[arg(long, conflicts_with = "grid_default")]
    pub grid: Option<String>,
    /// Use the standard 18-point grid (also the default when --grid is absent).
    #[arg(long = "grid-default")]
    pub grid_default: bool,
    /// Tolerance for the per-fold training solver.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// classifier.json produced by `tune` or `grid`.
    #[arg(long)]
    pub model: PathBuf,
    /// LIBSVM file to score (all samples are used).
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TraceArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the trace CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to replay a run, serialized next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub data: String,
    pub folds: usize,
    pub train_size: usize,
    pub seed: u64,
    pub solver: Option<SolverConfig>,
    pub grid: Option<Vec<f64>>,
    pub out_dir: String,
    pub format: Option<OutputFormat>,
    pub version: String,
}

/// Saved classifier: the rescaled hyperparameter and the retrained weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedClassifier {
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub w_hat: Vec<f64>,
    pub n: usize,
    pub metadata: ClassifierMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierMetadata {
    pub dataset: String,
    pub method: String,
    pub folds: usize,
    pub train_size: usize,
    pub seed: u64,
    pub version: String,
}

/// Rounds to `sig` significant digits for table-style output.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn dataset_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn load_dataset(split: &SplitArgs) -> Result<(Dataset, usize), String> {
    let ds = parse_libsvm(&split.data).map_err(|e| e.to_string())?;
    let l1 = split.train_size.unwrap_or(ds.len() * 3 / 4);
    Ok((ds, l1))
}

fn summary_csv_header() -> &'static str {
    "dataset,method,C,t,E_t,E_CV\n"
}

fn summary_csv_row(dataset: &str, res: &TuneResult) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        dataset,
        res.method,
        fmt_sig(res.c_star, 6),
        fmt_sig(res.train_seconds, 6),
        fmt_sig(res.e_t, 6),
        fmt_sig(res.e_cv, 6)
    )
}

fn print_summary(dataset: &str, res: &TuneResult, format: OutputFormat) {
    match format {
        OutputFormat::Csv => {
            print!("{}", summary_csv_header());
            print!("{}", summary_csv_row(dataset, res));
        }
        OutputFormat::Json => {
            let brief = serde_json::json!({
                "dataset": dataset,
                "method": res.method,
                "C": res.c_star,
                "C_hat": res.c_hat,
                "t": res.train_seconds,
                "E_t": res.e_t,
                "E_CV": res.e_cv,
            });
            println!("{brief}");
        }
    }
}

fn write_outputs(
    out_dir: &Path,
    dataset: &str,
    res: &TuneResult,
    manifest: &RunManifest,
) -> std::io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("summary.csv"),
        format!("{}{}", summary_csv_header(), summary_csv_row(dataset, res)),
    )?;
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(res)?,
    )?;
    if let Some(report) = &res.solve_report {
        let mut trace = Vec::new();
        report.write_trace_csv(&mut trace)?;
        fs::write(out_dir.join("trace.csv"), trace)?;
    }
    if let Some(rows) = &res.grid_rows {
        let mut grid_csv = String::from("C,E_CV,best\n");
        for row in rows {
            let best = if row.c == res.c_star { "*" } else { "" };
            grid_csv.push_str(&format!("{},{},{}\n", row.c, row.e_cv, best));
        }
        fs::write(out_dir.join("grid.csv"), grid_csv)?;
    }
    let classifier = SavedClassifier {
        c_hat: res.c_hat,
        w_hat: res.w_hat.clone(),
        n: res.w_hat.len(),
        metadata: ClassifierMetadata {
            dataset: dataset.to_string(),
            method: res.method.clone(),
            folds: res.split.t_folds,
            train_size: res.split.l1,
            seed: res.split.seed,
            version: crate::VERSION.to_string(),
        },
    };
    fs::write(
        out_dir.join("classifier.json"),
        serde_json::to_string_pretty(&classifier)?,
    )?;
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(manifest)?,
    )?;
    Ok(())
}

fn pipeline_exit(err: &PipelineError) -> i32 {
    match err {
        PipelineError::Data(_) => EXIT_INPUT_ERROR,
        _ => EXIT_NO_CONVERGENCE,
    }
}

pub fn cmd_tune(args: &TuneArgs) -> i32 {
    let (ds, l1) = match load_dataset(&args.split) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT_ERROR;
        }
    };
    let cfg = args.solver.to_config();
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return EXIT_INPUT_ERROR;
    }
    let res = match run_sncv(&ds, args.split.folds, l1, args.split.seed, &cfg) {
        Ok(res) => res,
        Err(e) => {
            eprintln!("error: {e}");
            return pipeline_exit(&e);
        }
    };
    let dataset = dataset_stem(&args.split.data);
    let manifest = RunManifest {
        command: "tune".into(),
        data: args.split.data.display().to_string(),
        folds: args.split.folds,
        train_size: l1,
        seed: args.split.seed,
        solver: Some(cfg),
        grid: None,
        out_dir: args.out.display().to_string(),
        format: Some(args.format),
        version: crate::VERSION.into(),
    };
    if let Err(e) = write_outputs(&args.out, &dataset, &res, &manifest) {
        eprintln!("error: failed to write outputs: {e}");
        return EXIT_INPUT_ERROR;
    }
    print_summary(&dataset, &res, args.format);
    let converged = res
        .solve_report
        .as_ref()
        .map(|r| r.converged)
        .unwrap_or(false);
    if converged {
        EXIT_OK
    } else {
        eprintln!(
            "warning: solver did not reach tolerance (final ‖Ê‖ = {})",
            res.solve_report
                .as_ref()
                .map(|r| r.e_hat_norm)
                .unwrap_or(f64::NAN)
        );
        EXIT_NO_CONVERGENCE
    }
}

pub fn cmd_grid(args: &GridArgs) -> i32 {
    let (ds, l1) = match load_dataset(&args.split) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT_ERROR;
        }
    };
    let grid = match &args.grid {
        Some(list) => {
            let parsed: Result<Vec<f64>, _> = list
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect();
            match parsed {
                Ok(values) => match GridSpec::from_values(values) {
                    Ok(g) => g,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_INPUT_ERROR;
                    }
                },
                Err(e) => {
                    eprintln!("error: bad --grid list: {e}");
                    return EXIT_INPUT_ERROR;
                }
            }
        }
        None => GridSpec::default_grid(),
    };
    let res = match run_gridcv(&ds, args.split.folds, l1, args.split.seed, &grid, args.tol) {
        Ok(res) => res,
        Err(e) => {
            eprintln!("error: {e}");
            return pipeline_exit(&e);
        }
    };
    let dataset = dataset_stem(&args.split.data);
    let manifest = RunManifest {
        command: "grid".into(),
        data: args.split.data.display().to_string(),
        folds: args.split.folds,
        train_size: l1,
        seed: args.split.seed,
        solver: None,
        grid: Some(grid.values.clone()),
        out_dir: args.out.display().to_string(),
        format: Some(args.format),
        version: crate::VERSION.into(),
    };
    if let Err(e) = write_outputs(&args.out, &dataset, &res, &manifest) {
        eprintln!("error: failed to write outputs: {e}");
        return EXIT_INPUT_ERROR;
    }
    print_summary(&dataset, &res, args.format);
    EXIT_OK
}

pub fn cmd_eval(args: &EvalArgs) -> i32 {
    let raw = match fs::read_to_string(&args.model) {
        Ok(raw) => raw,
        Err(e) => {
            eprintln!("error: failed to read {}: {e}", args.model.display());
            return EXIT_INPUT_ERROR;
        }
    };
    let classifier: SavedClassifier = match serde_json::from_str(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!(
                "error: {} is not a saved classifier: {e}",
                args.model.display()
            );
            return EXIT_INPUT_ERROR;
        }
    };
    let ds = match parse_libsvm(&args.data) {
        Ok(ds) => ds,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT_ERROR;
        }
    };
    let w = nalgebra::DVector::from_column_slice(&classifier.w_hat);
    let all: Vec<usize> = (0..ds.len()).collect();
    match test_error(&w, &ds, &all) {
        Ok(e_t) => {
            println!("E_t = {}", fmt_sig(e_t, 6));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

pub fn cmd_trace(args: &TraceArgs) -> i32 {
    let (ds, l1) = match load_dataset(&args.split) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT_ERROR;
        }
    };
    let cfg = args.solver.to_config();
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return EXIT_INPUT_ERROR;
    }
    let res = match run_sncv(&ds, args.split.folds, l1, args.split.seed, &cfg) {
        Ok(res) => res,
        Err(e) => {
            eprintln!("error: {e}");
            return pipeline_exit(&e);
        }
    };
    let report = res
        .solve_report
        .as_ref()
        .expect("SN backend always carries a report");
    let mut buf = Vec::new();
    if report.write_trace_csv(&mut buf).is_err() {
        eprintln!("error: failed to format trace");
        return EXIT_INPUT_ERROR;
    }
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &buf) {
                eprintln!("error: failed to write {}: {e}", path.display());
                return EXIT_INPUT_ERROR;
            }
        }
        None => {
            let _ = std::io::stdout().write_all(&buf);
        }
    }
    if report.converged {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    }
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match &cli.command {
        Command::Tune(args) => cmd_tune(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Trace(args) => cmd_trace(args),
    }
}
