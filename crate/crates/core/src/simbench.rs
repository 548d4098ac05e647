//! Simulation design, evaluation metrics, penalty/rank tuning, and the
//! benchmark harness that reproduces the method-comparison tables.
//!
//! Design: rows of `X` are i.i.d. `N(0, Σ)` with `Σⱼₖ = ρ^|j−k|`; the
//! coefficient matrix is `A = [b·B₀B₁; 0]` with standard normal `B₀` (`s×r`)
//! and `B₁` (`r×m`); noise is i.i.d. `N(0, σ²)`. Every scenario also draws an
//! independent validation set (for tuning) and an independent test set (for
//! the reported prediction error).

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    bsw_fit_warm, resolve_init, sarrs_fit_warm, FitReport, InitChoice, RankChoice, SarrsConfig,
};
use crate::gpls::{GplsOptions, LambdaRule};
use crate::init::default_eta_low_rank;
use crate::matrix::{column_space_basis, schatten_norm_sq, DenseMatrix, SchattenQ};
use crate::penalty::{PenaltyKind, PenaltySpec};

/// Validation and test rows used when a scenario does not say otherwise.
pub const DEFAULT_N_VALIDATION: usize = 2000;
pub const DEFAULT_GRID_LEN: usize = 50;
/// Environment variable capping the harness's worker threads.
pub const THREADS_ENV: &str = "SRRR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    pub r: usize,
    pub rho: f64,
    pub sigma: f64,
    pub b: f64,
    /// Rows in each of the validation and test sets.
    #[serde(default = "default_n_vld")]
    pub n_vld: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_vld() -> usize {
    DEFAULT_N_VALIDATION
}

impl Scenario {
    /// `n = 30, m = 10, p = 100, s = 15, r = 2, ρ = 0.1, σ = 1`.
    pub fn high_dim(b: f64) -> Self {
        Self { n: 30, m: 10, p: 100, s: 15, r: 2, rho: 0.1, sigma: 1.0, b, n_vld: DEFAULT_N_VALIDATION, seed: 0 }
    }

    /// `n = 100, m = 25, p = 25, s = 15, r = 5, ρ = 0.1, σ = 1`.
    pub fn low_dim(b: f64) -> Self {
        Self { n: 100, m: 25, p: 25, s: 15, r: 5, rho: 0.1, sigma: 1.0, b, n_vld: DEFAULT_N_VALIDATION, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn label(&self) -> String {
        format!("n{}_p{}_m{}_s{}_r{}_b{}", self.n, self.p, self.m, self.s, self.r, self.b)
    }

    /// A zero noise level is accepted and yields noiseless responses.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 || self.m == 0 || self.p == 0 {
            return bad("n, m and p must be positive".into());
        }
        if self.s > self.p {
            return bad(format!("sparsity s = {} exceeds p = {}", self.s, self.p));
        }
        if self.r == 0 || self.r > self.s.min(self.m) {
            return bad(format!("rank r = {} must lie in 1..=min(s, m) = {}", self.r, self.s.min(self.m)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("correlation rho = {} outside [0, 1)", self.rho));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be nonnegative", self.sigma));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad(format!("signal scale b = {} must be positive", self.b));
        }
        Ok(())
    }

    /// `Σⱼₖ = ρ^|j−k|`.
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |j, k| self.rho.powi(j.abs_diff(k) as i32))
    }
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub x: DenseMatrix,
    pub a: DenseMatrix,
    pub y: DenseMatrix,
    pub x_vld: DenseMatrix,
    pub y_vld: DenseMatrix,
    pub x_test: DenseMatrix,
    pub y_test: DenseMatrix,
}

/// Draws one dataset; fully determined by the scenario (including its seed).
pub fn generate_scenario(sc: &Scenario) -> Result<SimData> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut normal = |rows: usize, cols: usize| -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    };
    let b0 = normal(sc.s, sc.r);
    let b1 = normal(sc.r, sc.m);
    let top = (b0 * b1) * sc.b;
    let mut a = DMatrix::zeros(sc.p, sc.m);
    a.rows_mut(0, sc.s).copy_from(&top);

    let chol = Cholesky::new(sc.covariance())
        .ok_or_else(|| Error::InvalidArgument("design covariance is not positive definite".into()))?;
    let lt = chol.l().transpose();
    let mut draw = |rows: usize| -> (DMatrix<f64>, DMatrix<f64>) {
        let x = normal(rows, sc.p) * &lt;
        let z = normal(rows, sc.m) * sc.sigma;
        let y = &x * &a + z;
        (x, y)
    };
    let (x, y) = draw(sc.n);
    let (x_vld, y_vld) = draw(sc.n_vld);
    let (x_test, y_test) = draw(sc.n_vld);
    Ok(SimData {
        x: DenseMatrix::wrap(x),
        a: DenseMatrix::wrap(a),
        y: DenseMatrix::wrap(y),
        x_vld: DenseMatrix::wrap(x_vld),
        y_vld: DenseMatrix::wrap(y_vld),
        x_test: DenseMatrix::wrap(x_test),
        y_test: DenseMatrix::wrap(y_test),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    /// `‖X_test Â − Y_test‖²_F / (m · n_test)`.
    pub prediction_error: f64,
    /// `‖Â − A‖²_F / (m p)`.
    pub estimation_error: f64,
    pub support_size: usize,
    /// `(q, ‖Â − A‖²_{S_q})` for each requested `q`.
    pub schatten_losses: Vec<(f64, f64)>,
}

pub fn evaluate(
    a_hat: &DenseMatrix,
    a: &DenseMatrix,
    x_test: &DenseMatrix,
    y_test: &DenseMatrix,
    q_list: &[SchattenQ],
) -> Result<Evaluation> {
    let diff = a_hat.sub(a)?;
    let (p, m) = a.shape();
    let resid = y_test.sub(&x_test.matmul(a_hat)?)?;
    let n_test = y_test.rows().max(1);
    Ok(Evaluation {
        prediction_error: resid.frobenius_norm_sq() / (m * n_test) as f64,
        estimation_error: diff.frobenius_norm_sq() / (m * p) as f64,
        support_size: a_hat.row_support().len(),
        schatten_losses: q_list.iter().map(|&q| (q.value(), schatten_norm_sq(&diff, q))).collect(),
    })
}

/// Scores coefficient matrices on a held-out set through its Gram
/// statistics, without forming `X_vld Â`.
#[derive(Debug, Clone)]
pub struct HoldoutScorer {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    y_sq: f64,
    denom: f64,
}

impl HoldoutScorer {
    pub fn new(x_vld: &DenseMatrix, y_vld: &DenseMatrix) -> Result<Self> {
        if x_vld.rows() != y_vld.rows() || x_vld.rows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "validation design has {} rows, responses {}",
                x_vld.rows(),
                y_vld.rows()
            )));
        }
        let x = x_vld.as_dmatrix();
        Ok(Self {
            gram: x.transpose() * x,
            cross: x.transpose() * y_vld.as_dmatrix(),
            y_sq: y_vld.frobenius_norm_sq(),
            denom: (y_vld.rows() * y_vld.cols()) as f64,
        })
    }

    /// Score of the zero estimator, `‖Y_vld‖²_F / (m · n_vld)`.
    pub fn null_score(&self) -> f64 {
        self.y_sq / self.denom
    }

    /// `‖Y_vld − X_vld Â‖²_F / (m · n_vld)`.
    pub fn score(&self, a_hat: &DenseMatrix) -> f64 {
        let a = a_hat.as_dmatrix();
        let quad = (a.transpose() * &self.gram).component_mul(&a.transpose()).sum();
        let lin = self.cross.component_mul(a).sum();
        ((quad - 2.0 * lin + self.y_sq) / self.denom).max(0.0)
    }
}

/// `σ̂² = ‖Y_vld − P Y_vld‖²_F / (m·n_vld − m·p)`, with `P` the projector
/// onto the column space of the validation design.
pub fn validation_sigma_sq(x_vld: &DenseMatrix, y_vld: &DenseMatrix) -> Result<f64> {
    let (n, p) = x_vld.shape();
    let m = y_vld.cols();
    if n <= p {
        return Err(Error::InvalidArgument(format!(
            "validation set needs more rows ({n}) than predictors ({p})"
        )));
    }
    let basis = column_space_basis(x_vld.as_dmatrix());
    let fitted_sq = (basis.transpose() * y_vld.as_dmatrix()).norm_squared();
    let resid_sq = (y_vld.frobenius_norm_sq() - fitted_sq).max(0.0);
    Ok(resid_sq / (m * n - m * p) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Sarrs,
    Bsw,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Sarrs => "SARRS",
            Method::Bsw => "BSW",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    Explicit(Vec<f64>),
    /// `count` equally spaced points in `(0, λ̄]`, with
    /// `λ̄ = 2σ·maxⱼ‖X_{*j}‖·(√r + 2√(log p))` evaluated per rank candidate.
    Ceiling { count: usize, sigma: f64 },
}

impl LambdaGrid {
    /// Ascending grid values for rank `r`.
    pub fn values(&self, x: &DenseMatrix, r: usize) -> Result<Vec<f64>> {
        match self {
            LambdaGrid::Explicit(v) => Ok(v.clone()),
            LambdaGrid::Ceiling { count, sigma } => {
                let top = LambdaRule::GridCeiling.evaluate(x, r, *sigma)?;
                Ok(equally_spaced(top, *count))
            }
        }
    }
}

/// `top·k/count` for `k = 1..=count`.
pub fn equally_spaced(top: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| top * k as f64 / count as f64).collect()
}

#[derive(Debug, Clone)]
pub enum Validation {
    Holdout { x: DenseMatrix, y: DenseMatrix },
    /// Contiguous folds in row order.
    KFold(usize),
}

#[derive(Debug, Clone)]
pub struct CvPlan {
    pub lambda_grid: LambdaGrid,
    pub validation: Validation,
    /// `None` uses the rank chosen by `config`.
    pub rank_candidates: Option<Vec<usize>>,
}

impl CvPlan {
    fn validate(&self) -> Result<()> {
        if let LambdaGrid::Explicit(v) = &self.lambda_grid {
            if v.is_empty() || v.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(Error::InvalidArgument("lambda grid must be nonempty and strictly positive".into()));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument("lambda grid must be strictly increasing".into()));
            }
        }
        if let LambdaGrid::Ceiling { count, sigma } = self.lambda_grid {
            if count == 0 || !(sigma > 0.0) {
                return Err(Error::InvalidArgument("grid needs count >= 1 and sigma > 0".into()));
            }
        }
        if let Validation::KFold(k) = self.validation {
            if k < 2 {
                return Err(Error::InvalidArgument(format!("k-fold needs k >= 2, got {k}")));
            }
        }
        if let Some(c) = &self.rank_candidates {
            if c.is_empty() || c.contains(&0) {
                return Err(Error::InvalidArgument("rank candidates must be nonempty and positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CvEntry {
    pub rank: usize,
    pub lambda: f64,
    /// Mean validation prediction error; `None` when the fit failed.
    pub error: Option<f64>,
    /// Group regressions per fit, averaged over folds.
    pub gpls_invocations: f64,
    /// Alternations of the iterative method, averaged over folds.
    pub alternations: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best_lambda: f64,
    pub best_rank: usize,
    pub table: Vec<CvEntry>,
    /// The holdout fit at the optimum, or the refit on all data for k-fold.
    pub best_fit: FitReport,
    pub best_alternations: Option<usize>,
}

/// One fitted grid point.
struct PathPoint {
    lambda: f64,
    fit: Result<(FitReport, Option<usize>)>,
}

/// Fits every grid value from largest to smallest, warm-starting each from
/// the previous success, and returns results in ascending-`λ` order.
fn fit_path(
    x: &DenseMatrix,
    y: &DenseMatrix,
    base: &SarrsConfig,
    method: Method,
    kind: PenaltyKind,
    shape: Option<f64>,
    grid: &[f64],
) -> Vec<PathPoint> {
    let mut out: Vec<PathPoint> = Vec::with_capacity(grid.len());
    let mut warm: Option<FitReport> = None;
    for &lambda in grid.iter().rev() {
        let spec = match shape {
            Some(g) => PenaltySpec::new(kind, lambda, g),
            None => PenaltySpec::with_default_shape(kind, lambda),
        };
        let fit = spec.and_then(|spec| {
            let cfg = base.clone().with_penalty(spec);
            match method {
                Method::Sarrs => sarrs_fit_warm(x, y, &cfg, warm.as_ref()).map(|f| (f, None)),
                Method::Bsw => bsw_fit_warm(x, y, &cfg, warm.as_ref().map(|f| &f.b2))
                    .map(|r| (r.fit, Some(r.alternations))),
            }
        });
        if let Ok((f, _)) = &fit {
            warm = Some(f.clone());
        }
        out.push(PathPoint { lambda, fit });
    }
    out.reverse();
    out
}

/// Relative size, against the zero estimator's score, below which two
/// validation errors are indistinguishable from rounding in the scorer.
const TIE_RTOL: f64 = 1e-12;

/// Index of the minimum error; errors within `tie` of the minimum count as
/// ties, which go to larger `λ`, then smaller rank.
fn select_best(candidates: &[(f64, f64, usize)], tie: f64) -> Option<usize> {
    let min = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.0 <= min + tie)
        .min_by(|(_, a), (_, b)| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)))
        .map(|(i, _)| i)
}

/// Tunes `λ` (and optionally the rank) by validation prediction error.
///
/// The initial subspace is computed once per rank candidate and training
/// set, then shared across the `λ` grid.
pub fn cross_validate(
    x: &DenseMatrix,
    y: &DenseMatrix,
    plan: &CvPlan,
    method: Method,
    config: &SarrsConfig,
) -> Result<CvOutcome> {
    plan.validate()?;
    let (kind, shape) = match config.penalty {
        crate::estimator::PenaltySetting::Spec(s) => (s.kind(), Some(s.shape())),
        crate::estimator::PenaltySetting::Auto(k) => (k, None),
    };
    let ranks: Vec<Option<usize>> = match &plan.rank_candidates {
        Some(c) => c.iter().map(|&r| Some(r)).collect(),
        None => vec![None],
    };

    // (train x, train y, scorer) per fold.
    let folds: Vec<(DenseMatrix, DenseMatrix, HoldoutScorer)> = match &plan.validation {
        Validation::Holdout { x: xv, y: yv } => vec![(x.clone(), y.clone(), HoldoutScorer::new(xv, yv)?)],
        Validation::KFold(k) => {
            let n = x.rows();
            if *k > n {
                return Err(Error::InvalidArgument(format!("{k} folds for {n} rows")));
            }
            (0..*k)
                .map(|f| {
                    let lo = f * n / k;
                    let hi = (f + 1) * n / k;
                    let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
                    let test: Vec<usize> = (lo..hi).collect();
                    let scorer = HoldoutScorer::new(&x.select_rows(&test), &y.select_rows(&test))?;
                    Ok((x.select_rows(&train), y.select_rows(&train), scorer))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut table = Vec::new();
    let mut causes = Vec::new();
    let tie = TIE_RTOL * folds.iter().map(|(_, _, sc)| sc.null_score()).fold(0.0, f64::max);
    let mut candidates: Vec<((f64, f64, usize), usize)> = Vec::new();
    let mut holdout_fits: Vec<Option<(FitReport, Option<usize>)>> = Vec::new();

    for rank in ranks {
        let rank_choice = rank.map_or(config.rank, RankChoice::Fixed);
        let mut per_fold = Vec::with_capacity(folds.len());
        let mut resolved_rank = rank;
        for (xt, yt, scorer) in &folds {
            let init_cfg = config.clone().with_rank(rank_choice);
            let init = match resolve_init(xt, yt, &init_cfg) {
                Ok(i) => i,
                Err(e) => {
                    causes.push(format!("rank {rank:?}: {e}"));
                    per_fold.push(None);
                    continue;
                }
            };
            let r = init.v0.cols();
            resolved_rank.get_or_insert(r);
            let grid = plan.lambda_grid.values(xt, r)?;
            let mut base = config.clone().with_rank(RankChoice::Fixed(r)).with_init(InitChoice::Provided(init.v0.clone()));
            if let Some(s) = init.sigma {
                base = base.with_sigma(s);
            }
            let path = fit_path(xt, yt, &base, method, kind, shape, &grid);
            per_fold.push(Some((init.gpls_invocations, path, scorer)));
        }
        let Some(r) = resolved_rank else { continue };
        let n_points = per_fold
            .iter()
            .flatten()
            .map(|(_, path, _)| path.len())
            .max()
            .unwrap_or(0);
        for i in 0..n_points {
            let mut errs = Vec::new();
            let mut inv = Vec::new();
            let mut alt = Vec::new();
            let mut lambda = f64::NAN;
            let mut failed = per_fold.iter().any(Option::is_none);
            for (init_inv, path, scorer) in per_fold.iter().flatten() {
                let pt = &path[i];
                lambda = pt.lambda;
                match &pt.fit {
                    Ok((fit, alts)) => {
                        errs.push(scorer.score(&fit.a_hat));
                        inv.push((fit.diagnostics.gpls_invocations + init_inv) as f64);
                        if let Some(a) = alts {
                            alt.push(*a as f64);
                        }
                    }
                    Err(e) => {
                        failed = true;
                        causes.push(format!("rank {r}, lambda {lambda:.4e}: {e}"));
                    }
                }
            }
            let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            let error = (!failed).then(|| mean(&errs));
            if let Some(e) = error {
                candidates.push(((e, lambda, r), table.len()));
            }
            table.push(CvEntry {
                rank: r,
                lambda,
                error,
                gpls_invocations: mean(&inv),
                alternations: (!alt.is_empty()).then(|| mean(&alt)),
            });
            if folds.len() == 1 {
                let fit = per_fold[0]
                    .as_ref()
                    .and_then(|(_, path, _)| path[i].fit.as_ref().ok().cloned());
                holdout_fits.push(fit);
            }
        }
    }

    let keys: Vec<(f64, f64, usize)> = candidates.iter().map(|c| c.0).collect();
    let Some(((_, best_lambda, best_rank), idx)) = select_best(&keys, tie).map(|i| candidates[i]) else {
        return Err(Error::AllFitsFailed { attempted: table.len().max(1), causes: causes.join("; ") });
    };
    let (best_fit, best_alternations) = if folds.len() == 1 {
        holdout_fits[idx].clone().expect("best entry succeeded")
    } else {
        let spec = match shape {
            Some(g) => PenaltySpec::new(kind, best_lambda, g)?,
            None => PenaltySpec::with_default_shape(kind, best_lambda)?,
        };
        let rank_choice = if plan.rank_candidates.is_some() {
            RankChoice::Fixed(best_rank)
        } else {
            config.rank
        };
        let cfg = config.clone().with_rank(rank_choice).with_penalty(spec);
        match method {
            Method::Sarrs => (sarrs_fit_warm(x, y, &cfg, None)?, None),
            Method::Bsw => {
                let r = bsw_fit_warm(x, y, &cfg, None)?;
                (r.fit, Some(r.alternations))
            }
        }
    };
    Ok(CvOutcome { best_lambda, best_rank, table, best_fit, best_alternations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub penalty: PenaltyKind,
}

impl MethodSpec {
    pub fn new(method: Method, penalty: PenaltyKind) -> Self {
        Self { method, penalty }
    }

    /// SARRS and BSW, each with the group lasso and group MCP.
    pub fn comparison_set() -> Vec<Self> {
        let mut v = Vec::new();
        for method in [Method::Bsw, Method::Sarrs] {
            for penalty in [PenaltyKind::GroupLasso, PenaltyKind::GroupMcp] {
                v.push(Self { method, penalty });
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub master_seed: u64,
    pub grid_len: usize,
    pub q_list: Vec<SchattenQ>,
    pub solver: GplsOptions,
    /// Worker cap; `None` reads `SRRR_THREADS`, then uses all cores.
    pub threads: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            master_seed: 20240101,
            grid_len: DEFAULT_GRID_LEN,
            q_list: vec![SchattenQ::new(1.0).expect("valid q")],
            solver: GplsOptions::default(),
            threads: None,
        }
    }
}

/// Outcome of one method on one replication.
#[derive(Debug, Clone, Serialize)]
pub struct SimRecord {
    pub setting: usize,
    pub replication: usize,
    pub method: Method,
    pub penalty: PenaltyKind,
    /// `None` when initialization or every grid fit failed.
    pub result: Option<SimResult>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub prediction_error: f64,
    pub estimation_error: f64,
    pub support_size: usize,
    pub r_hat: usize,
    pub selected_lambda: f64,
    /// Group regressions at the selected `λ`.
    pub gpls_invocations: usize,
    /// Group regressions averaged over every completed grid point.
    pub gpls_invocations_overall: f64,
    /// Fraction of grid points that completed.
    pub completion_rate: f64,
    pub schatten_losses: Vec<(f64, f64)>,
    pub sigma_hat: f64,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub setting: String,
    pub method: String,
    pub penalty: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkOutput {
    pub settings: Vec<Scenario>,
    pub records: Vec<SimRecord>,
    pub table: Vec<TableRow>,
}

/// 64-bit mix of the master seed with unit coordinates (SplitMix64 finalizer).
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Resolves the worker count from the option, then `SRRR_THREADS`.
pub fn thread_cap(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok()).filter(|&t| t > 0)
}

/// Runs every method on every replication of every setting.
///
/// Work units are `(setting, replication)` pairs, each seeded from the
/// master seed and its coordinates, so output does not depend on the
/// thread schedule. All methods within a unit see the same dataset.
pub fn run_benchmark(
    settings: &[Scenario],
    methods: &[MethodSpec],
    replications: usize,
    options: &BenchOptions,
) -> Result<BenchmarkOutput> {
    if settings.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one scenario".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one method".into()));
    }
    if replications < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replications, got {replications}")));
    }
    for sc in settings {
        sc.validate()?;
        if sc.n_vld <= sc.p {
            return Err(Error::InvalidArgument(format!(
                "validation rows ({}) must exceed p ({}) to estimate the noise level",
                sc.n_vld, sc.p
            )));
        }
    }
    let units: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..replications).map(move |r| (s, r)))
        .collect();
    let work = || -> Vec<Vec<SimRecord>> {
        units
            .par_iter()
            .map(|&(s, r)| run_unit(settings, s, r, methods, options))
            .collect()
    };
    let nested = match thread_cap(options.threads) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let records: Vec<SimRecord> = nested.into_iter().flatten().collect();
    let table = summarize(settings, methods, &records);
    Ok(BenchmarkOutput { settings: settings.to_vec(), records, table })
}

fn run_unit(
    settings: &[Scenario],
    s: usize,
    rep: usize,
    methods: &[MethodSpec],
    options: &BenchOptions,
) -> Vec<SimRecord> {
    let sc = settings[s].with_seed(derive_seed(options.master_seed, s as u64, rep as u64));
    let fail = |msg: String| -> Vec<SimRecord> {
        methods
            .iter()
            .map(|ms| SimRecord {
                setting: s,
                replication: rep,
                method: ms.method,
                penalty: ms.penalty,
                result: None,
                failure: Some(msg.clone()),
            })
            .collect()
    };
    let data = match generate_scenario(&sc) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let sigma_hat = match validation_sigma_sq(&data.x_vld, &data.y_vld) {
        Ok(v) if v > 0.0 => v.sqrt(),
        Ok(_) => return fail("validation noise estimate is zero".into()),
        Err(e) => return fail(e.to_string()),
    };
    let eta = default_eta_low_rank(sc.n, sc.m, sc.p);
    let base = SarrsConfig::default()
        .with_sigma(sigma_hat)
        .with_init(InitChoice::LowRank { eta: Some(eta) })
        .with_solver(options.solver);
    let init = match resolve_init(&data.x, &data.y, &base) {
        Ok(i) => i,
        Err(e) => return fail(format!("initialization: {e}")),
    };
    let r_hat = init.v0.cols();
    let grid = match LambdaRule::GridCeiling.evaluate(&data.x, r_hat, sigma_hat) {
        Ok(top) => equally_spaced(top, options.grid_len),
        Err(e) => return fail(e.to_string()),
    };
    let scorer = match HoldoutScorer::new(&data.x_vld, &data.y_vld) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let fixed = base
        .with_rank(RankChoice::Fixed(r_hat))
        .with_init(InitChoice::Provided(init.v0.clone()));

    methods
        .iter()
        .map(|ms| {
            let start = Instant::now();
            let path = fit_path(&data.x, &data.y, &fixed, ms.method, ms.penalty, None, &grid);
            let mut scored: Vec<(f64, f64, &FitReport, usize)> = Vec::new();
            let mut inv_sum = 0.0;
            let mut done = 0usize;
            let mut last_err = None;
            for pt in &path {
                match &pt.fit {
                    Ok((fit, alts)) => {
                        let inv = alts.unwrap_or(fit.diagnostics.gpls_invocations);
                        inv_sum += inv as f64;
                        done += 1;
                        scored.push((scorer.score(&fit.a_hat), pt.lambda, fit, inv));
                    }
                    Err(e) => last_err = Some(e.to_string()),
                }
            }
            let keys: Vec<(f64, f64, usize)> = scored.iter().map(|c| (c.0, c.1, r_hat)).collect();
            let best = select_best(&keys, TIE_RTOL * scorer.null_score()).map(|i| scored[i]);
            let (result, failure) = match best {
                Some((_, lambda, fit, inv)) => {
                    match evaluate(&fit.a_hat, &data.a, &data.x_test, &data.y_test, &options.q_list) {
                        Ok(ev) => (
                            Some(SimResult {
                                prediction_error: ev.prediction_error,
                                estimation_error: ev.estimation_error,
                                support_size: ev.support_size,
                                r_hat,
                                selected_lambda: lambda,
                                gpls_invocations: inv,
                                gpls_invocations_overall: inv_sum / done as f64,
                                completion_rate: done as f64 / path.len() as f64,
                                schatten_losses: ev.schatten_losses,
                                sigma_hat,
                                wall_time_secs: start.elapsed().as_secs_f64(),
                            }),
                            None,
                        ),
                        Err(e) => (None, Some(e.to_string())),
                    }
                }
                None => (None, Some(last_err.unwrap_or_else(|| "no grid points".into()))),
            };
            SimRecord { setting: s, replication: rep, method: ms.method, penalty: ms.penalty, result, failure }
        })
        .collect()
}

/// Sample mean and standard deviation (`n − 1` denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn summarize(settings: &[Scenario], methods: &[MethodSpec], records: &[SimRecord]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for (si, sc) in settings.iter().enumerate() {
        for ms in methods {
            let cell: Vec<&SimRecord> = records
                .iter()
                .filter(|r| r.setting == si && r.method == ms.method && r.penalty == ms.penalty)
                .collect();
            let ok: Vec<&SimResult> = cell.iter().filter_map(|r| r.result.as_ref()).collect();
            let mut push = |metric: String, values: Vec<f64>| {
                let (mean, sd) = mean_sd(&values);
                rows.push(TableRow {
                    setting: sc.label(),
                    method: ms.method.label().into(),
                    penalty: ms.penalty.label().into(),
                    metric,
                    mean,
                    sd,
                });
            };
            push("prediction_error".into(), ok.iter().map(|r| r.prediction_error).collect());
            push("estimation_error".into(), ok.iter().map(|r| r.estimation_error).collect());
            push("support_size".into(), ok.iter().map(|r| r.support_size as f64).collect());
            push("r_hat".into(), ok.iter().map(|r| r.r_hat as f64).collect());
            push("gpls_invocations_selected".into(), ok.iter().map(|r| r.gpls_invocations as f64).collect());
            push("gpls_invocations_overall".into(), ok.iter().map(|r| r.gpls_invocations_overall).collect());
            push("selected_lambda".into(), ok.iter().map(|r| r.selected_lambda).collect());
            let qs: Vec<f64> = ok.first().map(|r| r.schatten_losses.iter().map(|l| l.0).collect()).unwrap_or_default();
            for (k, q) in qs.iter().enumerate() {
                push(format!("schatten_q{q}_loss"), ok.iter().map(|r| r.schatten_losses[k].1).collect());
            }
            push("grid_completion_rate".into(), ok.iter().map(|r| r.completion_rate).collect());
            let rate = ok.len() as f64 / cell.len().max(1) as f64;
            rows.push(TableRow {
                setting: sc.label(),
                method: ms.method.label().into(),
                penalty: ms.penalty.label().into(),
                metric: "replication_completion_rate".into(),
                mean: rate,
                sd: 0.0,
            });
        }
    }
    rows
}

impl BenchmarkOutput {
    /// Records of one method/penalty cell that completed.
    pub fn results(&self, setting: usize, spec: MethodSpec) -> Vec<&SimResult> {
        self.records
            .iter()
            .filter(|r| r.setting == setting && r.method == spec.method && r.penalty == spec.penalty)
            .filter_map(|r| r.result.as_ref())
            .collect()
    }

    pub fn row(&self, setting: &str, spec: MethodSpec, metric: &str) -> Option<&TableRow> {
        self.table.iter().find(|r| {
            r.setting == setting
                && r.method == spec.method.label()
                && r.penalty == spec.penalty.label()
                && r.metric == metric
        })
    }

    /// Table as CSV with columns `setting,method,penalty,metric,mean,sd`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.table {
            w.serialize(row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
