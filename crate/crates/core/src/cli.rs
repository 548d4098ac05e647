//! Command implementations behind the `sarrs` binary.
//!
//! Exit codes: `0` success, `2` user or input error, `3` numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::estimator::{
    bsw_fit, sarrs_fit, FitReport, InitChoice, RankChoice, SarrsConfig, Splitting,
};
use crate::gpls::GplsOptions;
use crate::init::{estimate_sigma, EtaRule};
use crate::matrix::DenseMatrix;
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::simbench::{
    cross_validate, generate_scenario, run_benchmark, BenchOptions, CvPlan, LambdaGrid, Method,
    MethodSpec, Scenario, Validation, DEFAULT_GRID_LEN,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn user(message: impl Into<String>) -> Self {
        Self { code: EXIT_USER, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERIC } else { EXIT_USER };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sarrs", version, about = "Sparse reduced-rank regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a coefficient matrix to design and response CSVs.
    Fit(FitArgs),
    /// Draw a synthetic dataset from the simulation design.
    Simulate(SimulateArgs),
    /// Run the method-comparison benchmark and write summary tables.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Sarrs,
    Bsw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    Grlasso,
    Grmcp,
    Grscad,
    CappedL1,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Grlasso => PenaltyKind::GroupLasso,
            PenaltyArg::Grmcp => PenaltyKind::GroupMcp,
            PenaltyArg::Grscad => PenaltyKind::GroupScad,
            PenaltyArg::CappedL1 => PenaltyKind::CappedL1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    LowRank,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Design matrix CSV (n rows, p columns).
    #[arg(long)]
    pub x: PathBuf,
    /// Response matrix CSV (n rows, m columns).
    #[arg(long)]
    pub y: PathBuf,
    /// Output path for the estimate; the JSON sidecar goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "sarrs")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "grlasso")]
    pub penalty: PenaltyArg,
    /// Shape parameter (MCP/SCAD gamma, capped-l1 cap).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// `auto`, `cv`, or a nonnegative number.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// `auto`, `full`, or a positive integer.
    #[arg(long, default_value = "auto")]
    pub rank: String,
    #[arg(long, value_enum, default_value = "low-rank")]
    pub init: InitArg,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub sigma: String,
    /// Seed for response splitting.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use four independent response copies (needs a noise level).
    #[arg(long)]
    pub split: bool,
    /// Folds for `--lambda cv`.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Include wall-clock timings in the sidecar (breaks byte-identical reruns).
    #[arg(long)]
    pub record_timings: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioPreset {
    /// n = 30, m = 10, p = 100, s = 15, r = 2, b = 0.5.
    PaperHighDim,
    /// n = 100, m = 25, p = 25, s = 15, r = 5, b = 0.4.
    PaperLowDim,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub preset: Option<ScenarioPreset>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Noise level; zero gives noiseless responses.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BenchPreset {
    /// High-dimensional design at b = 0.5 and b = 1.
    Table1,
    /// Low-dimensional design at b = 0.2 and b = 0.4.
    Table2,
    /// All four settings.
    All,
    /// One reduced setting for quick checks.
    Smoke,
}

#[derive(Debug, clap::Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, conflicts_with = "config")]
    pub preset: Option<BenchPreset>,
    /// JSON file with `scenarios`, `methods`, `replications`, `seed`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validation/test rows per replication (overrides scenarios).
    #[arg(long)]
    pub n_vld: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Benchmark configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenarios: Vec<Scenario>,
    #[serde(default = "MethodSpec::comparison_set")]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_reps() -> usize {
    50
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

/// Reads a numeric CSV. A first row with no numeric cells is a header.
pub fn read_matrix_csv(path: &Path) -> CliResult<DenseMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = record
            .iter()
            .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if rows.is_empty() && width.is_none() && parsed.iter().all(Option::is_none) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::user(format!(
                "{}: line {line}: expected {expected} fields, found {}",
                path.display(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(expected);
        for (col, (cell, v)) in record.iter().zip(parsed).enumerate() {
            match v {
                Some(v) => row.push(v),
                None => {
                    return Err(CliError::user(format!(
                        "{}: line {line}, column {}: '{cell}' is not a finite number",
                        path.display(),
                        col + 1
                    )))
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::user(format!("{}: no numeric rows", path.display())));
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

/// Comma-separated rows; values use the shortest round-trip representation.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{}", m.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::user(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

fn parse_positive(name: &str, s: &str) -> CliResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(CliError::user(format!("--{name} expects a positive number or 'auto', got '{s}'"))),
    }
}

enum LambdaArg {
    Auto,
    Cv,
    Fixed(f64),
}

fn parse_lambda(s: &str) -> CliResult<LambdaArg> {
    match s {
        "auto" => Ok(LambdaArg::Auto),
        "cv" => Ok(LambdaArg::Cv),
        _ => match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaArg::Fixed(v)),
            _ => Err(CliError::user(format!("--lambda expects auto, cv or a nonnegative number, got '{s}'"))),
        },
    }
}

fn penalty_at(kind: PenaltyKind, gamma: Option<f64>, lambda: f64) -> CliResult<PenaltySpec> {
    Ok(match gamma {
        Some(g) => PenaltySpec::new(kind, lambda, g)?,
        None => PenaltySpec::with_default_shape(kind, lambda)?,
    })
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let start = Instant::now();
    let x = read_matrix_csv(&args.x)?;
    let y = read_matrix_csv(&args.y)?;
    if x.rows() != y.rows() {
        return Err(CliError::user(format!(
            "row count mismatch: {} has {} rows, {} has {}",
            args.x.display(),
            x.rows(),
            args.y.display(),
            y.rows()
        )));
    }
    let read_secs = start.elapsed().as_secs_f64();
    let (p, m) = (x.cols(), y.cols());

    let (sigma, sigma_source) = if args.sigma == "auto" {
        (estimate_sigma(&y)?, "estimated")
    } else {
        (parse_positive("sigma", &args.sigma)?, "flag")
    };
    let rank = match args.rank.as_str() {
        "auto" => RankChoice::Auto,
        "full" => RankChoice::Fixed(p.min(m)),
        s => match s.parse::<usize>() {
            Ok(r) if r >= 1 => RankChoice::Fixed(r),
            _ => return Err(CliError::user(format!("--rank expects auto, full or a positive integer, got '{s}'"))),
        },
    };
    let init = match args.init {
        InitArg::LowRank => InitChoice::LowRank { eta: None },
        InitArg::Sparse => InitChoice::Sparse { lambda0: None, eta: EtaRule::FromSupport },
    };
    let kind = PenaltyKind::from(args.penalty);
    let splitting = if args.split {
        Splitting::Split { sigma, seed: args.seed }
    } else {
        Splitting::Reuse
    };
    if args.tol <= 0.0 || args.max_iter == 0 {
        return Err(CliError::user("--tol must be positive and --max-iter at least 1"));
    }
    let mut config = SarrsConfig {
        rank,
        init,
        penalty: crate::estimator::PenaltySetting::Auto(kind),
        sigma: Some(sigma),
        splitting,
        solver: GplsOptions { tol: args.tol, max_iter: args.max_iter },
    };
    if let Some(g) = args.gamma {
        // Validate the shape early; the level is replaced below.
        PenaltySpec::new(kind, 0.0, g)?;
    }
    let method = match args.method {
        MethodArg::Sarrs => Method::Sarrs,
        MethodArg::Bsw => Method::Bsw,
    };

    let fit_start = Instant::now();
    let mut cv_table = None;
    let mut lambda_source = "auto";
    let (fit, alternations): (FitReport, Option<usize>) = match parse_lambda(&args.lambda)? {
        LambdaArg::Cv => {
            lambda_source = "cv";
            config.penalty = crate::estimator::PenaltySetting::Spec(penalty_at(kind, args.gamma, 1.0)?);
            let plan = CvPlan {
                lambda_grid: LambdaGrid::Ceiling { count: DEFAULT_GRID_LEN, sigma },
                validation: Validation::KFold(args.folds),
                rank_candidates: None,
            };
            let out = cross_validate(&x, &y, &plan, method, &config)?;
            cv_table = Some(out.table);
            (out.best_fit, out.best_alternations)
        }
        other => {
            if let LambdaArg::Fixed(l) = other {
                lambda_source = "flag";
                config.penalty = crate::estimator::PenaltySetting::Spec(penalty_at(kind, args.gamma, l)?);
            } else if args.gamma.is_some() {
                // Auto level with a custom shape: resolve the level first.
                let probe = crate::estimator::resolve_init(&x, &y, &config)?;
                let l = crate::gpls::default_lambda(&x, probe.v0.cols(), probe.sigma.unwrap_or(sigma))?;
                config.penalty = crate::estimator::PenaltySetting::Spec(penalty_at(kind, args.gamma, l)?);
            }
            match method {
                Method::Sarrs => (sarrs_fit(&x, &y, &config)?, None),
                Method::Bsw => {
                    let r = bsw_fit(&x, &y, &config)?;
                    (r.fit, Some(r.alternations))
                }
            }
        }
    };
    let fit_secs = fit_start.elapsed().as_secs_f64();

    let d = &fit.diagnostics;
    let mut sidecar = json!({
        "method": method.label(),
        "penalty": kind.label(),
        "lambda": d.lambda,
        "lambda_source": lambda_source,
        "sigma": sigma,
        "sigma_source": sigma_source,
        "rank_used": fit.rank_used,
        "support": fit.support,
        "gpls_invocations": d.gpls_invocations,
        "gpls_sweeps": d.gpls_sweeps,
        "converged": d.all_converged,
        "alternations": alternations,
        "init": d.init,
        "warnings": d.warnings,
        "n": x.rows(),
        "p": p,
        "m": m,
    });
    if let Some(t) = cv_table {
        sidecar["cv"] = serde_json::to_value(t).expect("serializable");
    }
    if args.record_timings {
        sidecar["timings"] = json!({ "read_secs": read_secs, "fit_secs": fit_secs });
    }
    match args.format {
        Format::Csv => {
            write_file(&args.out, &matrix_to_csv(&fit.a_hat))?;
            let side = args.out.with_extension("json");
            write_file(&side, &(serde_json::to_string_pretty(&sidecar).expect("json") + "\n"))?;
        }
        Format::Json => {
            let rows: Vec<Vec<f64>> = (0..fit.a_hat.rows())
                .map(|i| (0..m).map(|j| fit.a_hat.get(i, j)).collect())
                .collect();
            sidecar["a_hat"] = json!(rows);
            write_file(&args.out, &(serde_json::to_string_pretty(&sidecar).expect("json") + "\n"))?;
        }
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut sc = match args.preset {
        Some(ScenarioPreset::PaperHighDim) => Scenario::high_dim(0.5),
        Some(ScenarioPreset::PaperLowDim) => Scenario::low_dim(0.4),
        None => {
            let (Some(n), Some(m), Some(p), Some(s), Some(r)) = (args.n, args.m, args.p, args.s, args.r) else {
                return Err(CliError::user("without --preset, --n --m --p --s --r are required"));
            };
            Scenario { n, m, p, s, r, rho: 0.1, sigma: 1.0, b: 1.0, n_vld: 0, seed: 0 }
        }
    };
    if let Some(v) = args.n { sc.n = v; }
    if let Some(v) = args.m { sc.m = v; }
    if let Some(v) = args.p { sc.p = v; }
    if let Some(v) = args.s { sc.s = v; }
    if let Some(v) = args.r { sc.r = v; }
    if let Some(v) = args.rho { sc.rho = v; }
    if let Some(v) = args.sigma { sc.sigma = v; }
    if let Some(v) = args.b { sc.b = v; }
    sc.n_vld = 0;
    sc.seed = args.seed;
    sc.validate()?;
    let data = generate_scenario(&sc)?;
    write_file(&args.out.join("x.csv"), &matrix_to_csv(&data.x))?;
    write_file(&args.out.join("y.csv"), &matrix_to_csv(&data.y))?;
    write_file(&args.out.join("a_true.csv"), &matrix_to_csv(&data.a))?;
    let covariance = if sc.rho == 0.0 { "identity" } else { "ar1" };
    let meta = json!({
        "n": sc.n,
        "m": sc.m,
        "p": sc.p,
        "s": sc.s,
        "r": sc.r,
        "rho": sc.rho,
        "sigma": sc.sigma,
        "b": sc.b,
        "seed": sc.seed,
        "covariance": covariance,
        "files": { "x": "x.csv", "y": "y.csv", "a_true": "a_true.csv" },
    });
    write_file(&args.out.join("meta.json"), &(serde_json::to_string_pretty(&meta).expect("json") + "\n"))?;
    Ok(())
}

/// Scenarios and replication count behind each benchmark preset.
pub fn bench_preset(preset: BenchPreset) -> BenchConfig {
    let (scenarios, replications) = match preset {
        BenchPreset::Table1 => (vec![Scenario::high_dim(0.5), Scenario::high_dim(1.0)], 50),
        BenchPreset::Table2 => (vec![Scenario::low_dim(0.2), Scenario::low_dim(0.4)], 50),
        BenchPreset::All => (
            vec![
                Scenario::high_dim(0.5),
                Scenario::high_dim(1.0),
                Scenario::low_dim(0.2),
                Scenario::low_dim(0.4),
            ],
            50,
        ),
        BenchPreset::Smoke => {
            let mut sc = Scenario::high_dim(1.0);
            sc.n_vld = 300;
            (vec![sc], 2)
        }
    };
    BenchConfig { scenarios, methods: MethodSpec::comparison_set(), replications, seed: None }
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let mut config = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<BenchConfig>(&text)
                .map_err(|e| CliError::user(format!("{}: malformed benchmark config: {e}", path.display())))?
        }
        (None, Some(p)) => bench_preset(p),
        (None, None) => return Err(CliError::user("benchmark needs --preset or --config")),
    };
    if config.scenarios.is_empty() {
        return Err(CliError::user("benchmark config lists no scenarios"));
    }
    if config.methods.is_empty() {
        return Err(CliError::user("benchmark config lists no methods"));
    }
    if let Some(r) = args.reps {
        config.replications = r;
    }
    if let Some(n) = args.n_vld {
        for sc in &mut config.scenarios {
            sc.n_vld = n;
        }
    }
    let options = BenchOptions {
        master_seed: args.seed.or(config.seed).unwrap_or(BenchOptions::default().master_seed),
        threads: args.threads,
        ..BenchOptions::default()
    };
    let out = run_benchmark(&config.scenarios, &config.methods, config.replications, &options)
        .map_err(|e| match e {
            Error::InvalidArgument(_) => CliError::user(e.to_string()),
            other => CliError::from(other),
        })?;
    match args.format {
        Format::Csv => write_file(&args.out.join("benchmark.csv"), &out.to_csv()),
        Format::Json => write_file(&args.out.join("benchmark.json"), &(out.to_json() + "\n")),
    }
}
