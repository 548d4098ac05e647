//! The two-stage subspace-assisted estimator and its iterative competitor.
//!
//! [`sarrs_fit`] runs exactly two group-penalized regressions:
//!
//! 1. `B₁ = argmin ‖Y V₀ − XB‖²/2 + ρ(B)`
//! 2. `U₁` = leading left singular vectors of `X B₁`
//! 3. `V₁` = leading right singular vectors of `U₁U₁ᵀY`
//! 4. `B₂ = argmin ‖Y V₁ − XB‖²/2 + ρ(B)`
//! 5. `Â = B₂ V₁ᵀ`
//!
//! [`bsw_fit`] alternates a group regression for `B` with an orthogonal
//! Procrustes update for `V` until the relative objective change drops
//! below `1e-4`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gpls::{default_lambda, solve_gpls_warm, GplsOptions, GplsProblem};
use crate::init::{
    default_eta_low_rank, default_lambda0, estimate_sigma, init_low_rank_with, init_sparse_with,
    EtaRule, InitMethod, InitResult, RankRule, SparseRank,
};
use crate::matrix::{svd_sorted, DenseMatrix, RANK_TOLERANCE};
use crate::penalty::{penalty_value, PenaltyKind, PenaltySpec};

/// Relative objective change below which the alternating fit stops.
pub const BSW_REL_TOL: f64 = 1e-4;
pub const BSW_MAX_ALTERNATIONS: usize = 200;
const BSW_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankChoice {
    Fixed(usize),
    /// Take the rank selected by the initializer's threshold.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitChoice {
    /// Spectrum of `PY`; `eta` defaults to `√(2m) + √(2·min(n, p))`.
    LowRank { eta: Option<f64> },
    /// Spectrum of `XA₀`; `lambda0` defaults to the conservative rule with
    /// `r = m`.
    Sparse { lambda0: Option<f64>, eta: EtaRule },
    /// Caller-supplied orthonormal `m × r` matrix.
    Provided(DenseMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltySetting {
    Spec(PenaltySpec),
    /// Default shape with `λ = 4σ·maxⱼ‖X_{*j}‖·(√r + √(4 log p))`.
    Auto(PenaltyKind),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Splitting {
    /// Use the observed responses at every stage.
    Reuse,
    /// Synthesize four independent response copies with noise level `2σ`.
    Split { sigma: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarrsConfig {
    pub rank: RankChoice,
    pub init: InitChoice,
    pub penalty: PenaltySetting,
    /// Noise level for the rank threshold and automatic `λ`. `None` falls
    /// back to the median-singular-value estimate.
    pub sigma: Option<f64>,
    pub splitting: Splitting,
    pub solver: GplsOptions,
}

impl Default for SarrsConfig {
    fn default() -> Self {
        Self {
            rank: RankChoice::Auto,
            init: InitChoice::LowRank { eta: None },
            penalty: PenaltySetting::Auto(PenaltyKind::GroupLasso),
            sigma: None,
            splitting: Splitting::Reuse,
            solver: GplsOptions::default(),
        }
    }
}

impl SarrsConfig {
    pub fn with_penalty(mut self, spec: PenaltySpec) -> Self {
        self.penalty = PenaltySetting::Spec(spec);
        self
    }

    pub fn with_rank(mut self, rank: RankChoice) -> Self {
        self.rank = rank;
        self
    }

    pub fn with_init(mut self, init: InitChoice) -> Self {
        self.init = init;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_solver(mut self, solver: GplsOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    fn validate(&self, p: usize, m: usize) -> Result<()> {
        if let RankChoice::Fixed(r) = self.rank {
            let max = p.min(m);
            if r == 0 || r > max {
                return Err(Error::RankOutOfRange { requested: r, max });
            }
        }
        if let Splitting::Split { sigma, .. } = self.splitting {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "splitting needs a positive noise level, got {sigma}"
                )));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InitSummary {
    pub method: InitMethod,
    pub r_hat: usize,
    pub threshold: f64,
    pub leading_singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    /// Group-regression solves, including the sparse initializer's.
    pub gpls_invocations: usize,
    /// Coordinate-descent sweeps per solve, in call order.
    pub gpls_sweeps: Vec<usize>,
    pub all_converged: bool,
    pub lambda: f64,
    /// Noise level used by the initializer or automatic `λ`, if any.
    pub sigma: Option<f64>,
    pub init: Option<InitSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// `p × m` coefficient estimate, `b2 · v1ᵀ`.
    pub a_hat: DenseMatrix,
    /// First-stage coefficients (`p × r`), kept for warm starts.
    pub b1: DenseMatrix,
    pub b2: DenseMatrix,
    /// `m × rank_used`, orthonormal columns.
    pub v1: DenseMatrix,
    pub rank_used: usize,
    /// Nonzero rows of `b2` (and hence of `a_hat`).
    pub support: Vec<usize>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone)]
pub struct BswReport {
    pub fit: FitReport,
    /// Completed `B`/`V` alternations; each costs one group regression.
    pub alternations: usize,
    /// `‖Y − XBVᵀ‖²/2 + ρ(B)` after each alternation.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Four response copies `Y₍ᵢ₎ = Y + Gᵢ`, built by adding and subtracting
/// fresh Gaussian noise twice. If `Y = XA + Z` with `Z` i.i.d. `N(0, σ²)`,
/// the copies have mutually independent noise with variance `(2σ)²`.
pub fn split_responses(y: &DenseMatrix, sigma: f64, seed: u64) -> Result<[DenseMatrix; 4]> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "splitting noise level must be nonnegative, got {sigma}"
        )));
    }
    let (n, m) = y.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = Normal::new(0.0, sigma).expect("valid normal");
    let second = Normal::new(0.0, sigma * std::f64::consts::SQRT_2).expect("valid normal");
    let mut draw = |d: &Normal<f64>| DMatrix::from_fn(n, m, |_, _| d.sample(&mut rng));
    let z = draw(&first);
    let z_plus = draw(&second);
    let z_minus = draw(&second);
    let y = y.as_dmatrix();
    let up = y + &z;
    let down = y - &z;
    Ok([
        DenseMatrix::wrap(&up + &z_plus),
        DenseMatrix::wrap(&up - &z_plus),
        DenseMatrix::wrap(&down + &z_minus),
        DenseMatrix::wrap(&down - &z_minus),
    ])
}

/// Responses used at each stage: initializer, step 1, step 3, step 4.
struct StageResponses<'a> {
    copies: Option<[DenseMatrix; 4]>,
    y: &'a DenseMatrix,
}

impl StageResponses<'_> {
    fn get(&self, i: usize) -> &DenseMatrix {
        self.copies.as_ref().map_or(self.y, |c| &c[i])
    }
}

fn check_dims(x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but responses have {}",
            x.rows(),
            y.rows()
        )));
    }
    if x.rows() == 0 || x.cols() == 0 || y.cols() == 0 {
        return Err(Error::InvalidArgument("empty design or response".into()));
    }
    Ok(())
}

/// Initial subspace and the noise level it was computed with.
#[derive(Debug, Clone)]
pub struct ResolvedInit {
    /// `m × r`, orthonormal columns.
    pub v0: DenseMatrix,
    pub sigma: Option<f64>,
    pub summary: Option<InitSummary>,
    /// Group regressions spent by the initializer.
    pub gpls_invocations: usize,
}

/// Everything the two methods share before their first group regression.
struct Prepared<'a> {
    stages: StageResponses<'a>,
    init: ResolvedInit,
    penalty: PenaltySpec,
}

fn stage_responses<'a>(x: &DenseMatrix, y: &'a DenseMatrix, config: &SarrsConfig) -> Result<StageResponses<'a>> {
    check_dims(x, y)?;
    config.validate(x.cols(), y.cols())?;
    let copies = match config.splitting {
        Splitting::Reuse => None,
        Splitting::Split { sigma, seed } => Some(split_responses(y, sigma, seed)?),
    };
    Ok(StageResponses { copies, y })
}

/// Runs the configured initializer (on the reserved response copy in split
/// mode) and resolves the noise level.
pub fn resolve_init(x: &DenseMatrix, y: &DenseMatrix, config: &SarrsConfig) -> Result<ResolvedInit> {
    let stages = stage_responses(x, y, config)?;
    init_from(x, &stages, config)
}

fn init_from(x: &DenseMatrix, stages: &StageResponses<'_>, config: &SarrsConfig) -> Result<ResolvedInit> {
    let y0 = stages.get(0);
    let (p, m) = (x.cols(), y0.cols());
    let needs_sigma = (!matches!(config.init, InitChoice::Provided(_)) && config.rank == RankChoice::Auto)
        || matches!(config.penalty, PenaltySetting::Auto(_))
        || matches!(config.init, InitChoice::Sparse { lambda0: None, .. });
    // Split copies carry noise level 2σ.
    let sigma = match (config.splitting, config.sigma) {
        (Splitting::Split { sigma, .. }, _) => Some(2.0 * sigma),
        (Splitting::Reuse, Some(s)) => Some(s),
        (Splitting::Reuse, None) if needs_sigma => Some(estimate_sigma(y0)?),
        (Splitting::Reuse, None) => None,
    };

    let resolved = match &config.init {
        InitChoice::Provided(v0) => {
            if v0.rows() != m {
                return Err(Error::DimensionMismatch(format!(
                    "initial subspace has {} rows, responses have {m} columns",
                    v0.rows()
                )));
            }
            if let RankChoice::Fixed(r) = config.rank {
                if r != v0.cols() {
                    return Err(Error::InvalidArgument(format!(
                        "fixed rank {r} disagrees with the {} supplied initial columns",
                        v0.cols()
                    )));
                }
            }
            ResolvedInit { v0: v0.clone(), sigma, summary: None, gpls_invocations: 0 }
        }
        InitChoice::LowRank { eta } => {
            let rule = match config.rank {
                RankChoice::Fixed(r) => RankRule::Fixed(r),
                RankChoice::Auto => RankRule::Threshold {
                    sigma: sigma.expect("sigma resolved"),
                    eta: eta.unwrap_or_else(|| default_eta_low_rank(x.rows(), m, p)),
                },
            };
            let res = init_low_rank_with(x, y0, rule)?;
            ResolvedInit { summary: Some(summarize(&res)), v0: res.v0, sigma, gpls_invocations: 0 }
        }
        InitChoice::Sparse { lambda0, eta } => {
            let lambda0 = match lambda0 {
                Some(l) => *l,
                None => default_lambda0(x, m, sigma.expect("sigma resolved"))?,
            };
            let rank = match config.rank {
                RankChoice::Fixed(r) => SparseRank::Fixed(r),
                RankChoice::Auto => SparseRank::Eta { sigma: sigma.expect("sigma resolved"), rule: *eta },
            };
            let res = init_sparse_with(x, y0, lambda0, rank, &config.solver)?;
            ResolvedInit {
                summary: Some(summarize(&res)),
                v0: res.v0,
                sigma,
                gpls_invocations: res.gpls_invocations,
            }
        }
    };
    if resolved.v0.cols() == 0 {
        return Err(Error::RankZero { threshold: 0.0 });
    }
    Ok(resolved)
}

fn prepare<'a>(x: &DenseMatrix, y: &'a DenseMatrix, config: &SarrsConfig) -> Result<Prepared<'a>> {
    let stages = stage_responses(x, y, config)?;
    let init = init_from(x, &stages, config)?;
    let penalty = match config.penalty {
        PenaltySetting::Spec(spec) => spec,
        PenaltySetting::Auto(kind) => {
            let lambda = default_lambda(x, init.v0.cols(), init.sigma.expect("sigma resolved"))?;
            PenaltySpec::with_default_shape(kind, lambda)?
        }
    };
    Ok(Prepared { stages, init, penalty })
}

fn summarize(res: &InitResult) -> InitSummary {
    InitSummary {
        method: res.method,
        r_hat: res.r_hat,
        threshold: res.threshold_used,
        leading_singular_values: res.spectrum.iter().take(res.r_hat + 3).copied().collect(),
    }
}

fn warm_if_shaped(warm: Option<&DenseMatrix>, shape: (usize, usize)) -> Option<&DenseMatrix> {
    warm.filter(|b| b.shape() == shape)
}

/// Fits the subspace-assisted estimator.
pub fn sarrs_fit(x: &DenseMatrix, y: &DenseMatrix, config: &SarrsConfig) -> Result<FitReport> {
    sarrs_fit_warm(x, y, config, None)
}

/// As [`sarrs_fit`], starting both group regressions from a previous fit's
/// coefficients when shapes agree. Useful along a `λ` path.
pub fn sarrs_fit_warm(
    x: &DenseMatrix,
    y: &DenseMatrix,
    config: &SarrsConfig,
    warm: Option<&FitReport>,
) -> Result<FitReport> {
    let Prepared { stages, init, penalty } = prepare(x, y, config)?;
    let v0 = &init.v0;
    let (p, r0) = (x.cols(), v0.cols());
    let mut sweeps = Vec::new();
    let mut converged = true;
    let mut warnings = Vec::new();

    // Step 1.
    let w1 = stages.get(1).matmul(v0)?;
    let prob1 = GplsProblem::new(x, &w1, penalty)?;
    let sol1 = solve_gpls_warm(&prob1, &config.solver, warm_if_shaped(warm.map(|f| &f.b1), (p, r0)))?;
    sweeps.push(sol1.iterations);
    converged &= sol1.converged;

    // Step 2: leading left singular vectors of X B₁.
    let xb1 = x.as_dmatrix() * sol1.b.as_dmatrix();
    let (u, s, _) = svd_sorted(&xb1);
    let top = s.first().copied().unwrap_or(0.0);
    let k = if top > 0.0 {
        s.iter().take(r0).filter(|&&v| v > RANK_TOLERANCE * top).count()
    } else {
        0
    };
    if k == 0 {
        return Err(Error::ZeroSolution { lambda: penalty.lambda() });
    }
    if k < r0 {
        warnings.push(format!(
            "X·B1 has numerical rank {k} < {r0}; continuing with {k} components"
        ));
    }
    let u1 = u.columns(0, k).into_owned();

    // Step 3: right singular vectors of U₁U₁ᵀY.
    let proj = &u1 * (u1.transpose() * stages.get(2).as_dmatrix());
    let (_, _, v) = svd_sorted(&proj);
    let v1 = DenseMatrix::wrap(v.columns(0, k).into_owned());

    // Step 4.
    let w2 = stages.get(3).matmul(&v1)?;
    let prob2 = GplsProblem::new(x, &w2, penalty)?;
    let sol2 = solve_gpls_warm(&prob2, &config.solver, warm_if_shaped(warm.map(|f| &f.b2), (p, k)))?;
    sweeps.push(sol2.iterations);
    converged &= sol2.converged;

    // Step 5.
    let a_hat = sol2.b.matmul(&v1.transpose())?;
    let support = sol2.b.row_support();
    Ok(FitReport {
        a_hat,
        b1: sol1.b,
        b2: sol2.b,
        v1,
        rank_used: k,
        support,
        diagnostics: FitDiagnostics {
            gpls_invocations: 2 + init.gpls_invocations,
            gpls_sweeps: sweeps,
            all_converged: converged,
            lambda: penalty.lambda(),
            sigma: init.sigma,
            init: init.summary,
            warnings,
        },
    })
}

/// `‖Y − XBVᵀ‖²/2 + ρ(B)`.
pub fn bsw_objective(
    x: &DenseMatrix,
    y: &DenseMatrix,
    b: &DenseMatrix,
    v: &DenseMatrix,
    penalty: &PenaltySpec,
) -> f64 {
    let fitted = x.as_dmatrix() * b.as_dmatrix() * v.as_dmatrix().transpose();
    0.5 * (y.as_dmatrix() - fitted).norm_squared() + penalty_value(b, penalty)
}

/// Orthogonal Procrustes: the orthonormal `V` maximizing `tr(Vᵀ M)`,
/// i.e. `P Qᵀ` for the thin SVD `M = PΣQᵀ`.
pub fn procrustes(m: &DenseMatrix) -> DenseMatrix {
    let (p, _, q) = svd_sorted(m.as_dmatrix());
    DenseMatrix::wrap(p * q.transpose())
}

/// Alternating minimization of `‖Y − XBVᵀ‖²/2 + ρ(B)` over row-sparse `B`
/// and orthonormal `V`, started from the same initializer as
/// [`sarrs_fit`].
pub fn bsw_fit(x: &DenseMatrix, y: &DenseMatrix, config: &SarrsConfig) -> Result<BswReport> {
    bsw_fit_warm(x, y, config, None)
}

pub fn bsw_fit_warm(
    x: &DenseMatrix,
    y: &DenseMatrix,
    config: &SarrsConfig,
    warm: Option<&DenseMatrix>,
) -> Result<BswReport> {
    let Prepared { init, penalty, .. } = prepare(x, y, config)?;
    let (p, r) = (x.cols(), init.v0.cols());

    let mut v = init.v0.clone();
    let mut b: Option<DenseMatrix> = None;
    let mut trace = Vec::new();
    let mut sweeps = Vec::new();
    let mut all_converged = true;
    let mut converged = false;
    let mut prev: Option<f64> = None;

    while trace.len() < BSW_MAX_ALTERNATIONS {
        let w = y.matmul(&v)?;
        let prob = GplsProblem::new(x, &w, penalty)?;
        let start = b.as_ref().or(warm_if_shaped(warm, (p, r)));
        let sol = solve_gpls_warm(&prob, &config.solver, start)?;
        sweeps.push(sol.iterations);
        all_converged &= sol.converged;
        if sol.b.row_support().is_empty() {
            return Err(Error::ZeroSolution { lambda: penalty.lambda() });
        }
        let cross = y.transpose().matmul(&x.matmul(&sol.b)?)?;
        v = procrustes(&cross);
        let obj = bsw_objective(x, y, &sol.b, &v, &penalty);
        trace.push(obj);
        b = Some(sol.b);
        if let Some(prev) = prev {
            if (prev - obj).abs() / prev.max(BSW_EPS) < BSW_REL_TOL {
                converged = true;
                break;
            }
        }
        prev = Some(obj);
    }

    let b = b.expect("at least one alternation");
    let a_hat = b.matmul(&v.transpose())?;
    let support = b.row_support();
    let alternations = trace.len();
    Ok(BswReport {
        fit: FitReport {
            a_hat,
            b1: b.clone(),
            b2: b,
            v1: v,
            rank_used: r,
            support,
            diagnostics: FitDiagnostics {
                gpls_invocations: alternations + init.gpls_invocations,
                gpls_sweeps: sweeps,
                all_converged,
                lambda: penalty.lambda(),
                sigma: init.sigma,
                init: init.summary,
                warnings: Vec::new(),
            },
        },
        alternations,
        objective_trace: trace,
        converged,
    })
}
