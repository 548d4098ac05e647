//! Rank selection and initial right-subspace estimates.
//!
//! Two initializers are provided. [`init_low_rank`] thresholds the singular
//! values of `PY`, the projection of the responses onto the column space of
//! the design. [`init_sparse`] thresholds those of `XA₀`, where `A₀` is a
//! full-response group lasso fit. Both return the leading right singular
//! vectors of the matrix they threshold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpls::{solve_gpls, GplsOptions, GplsProblem, LambdaRule};
use crate::matrix::{column_space_basis, singular_values, svd_sorted, DenseMatrix, RANK_TOLERANCE};
use crate::penalty::PenaltySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMethod {
    LowRank,
    Sparse,
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub r_hat: usize,
    /// `m × r_hat`, orthonormal columns.
    pub v0: DenseMatrix,
    pub method: InitMethod,
    /// `σ·η`, or zero when the rank was fixed by the caller.
    pub threshold_used: f64,
    pub sigma_used: f64,
    /// Singular values of the thresholded matrix, in decreasing order.
    pub spectrum: Vec<f64>,
    /// Group-regression solves performed (one for the sparse initializer).
    pub gpls_invocations: usize,
}

/// How many leading right singular vectors to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    /// Keep every direction with `σⱼ ≥ σ·η`.
    Threshold { sigma: f64, eta: f64 },
    /// Keep exactly this many.
    Fixed(usize),
}

/// Threshold level for the sparse initializer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    Fixed(f64),
    /// `η = √(s₀(m + 4 log p))` with `s₀` the support size of `A₀`.
    FromSupport,
}

/// `median(nonzero singular values of Y) / √max(n, m)`.
pub fn estimate_sigma(y: &DenseMatrix) -> Result<f64> {
    let s = singular_values(y);
    let top = s.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::InvalidArgument(
            "noise level estimate needs a nonzero response matrix".into(),
        ));
    }
    let nz: Vec<f64> = s.into_iter().filter(|&v| v > RANK_TOLERANCE * top).collect();
    let k = nz.len();
    // Sorted decreasing; the median is symmetric in order.
    let median = if k % 2 == 1 {
        nz[k / 2]
    } else {
        0.5 * (nz[k / 2 - 1] + nz[k / 2])
    };
    Ok(median / (y.rows().max(y.cols()) as f64).sqrt())
}

/// `η = √(2m) + √(2·min(n, p))`.
pub fn default_eta_low_rank(n: usize, m: usize, p: usize) -> f64 {
    (2.0 * m as f64).sqrt() + (2.0 * n.min(p) as f64).sqrt()
}

/// `λ₀ = 4σ·maxⱼ‖X_{*j}‖·(√m + √(4 log p))`.
pub fn default_lambda0(x: &DenseMatrix, m: usize, sigma: f64) -> Result<f64> {
    LambdaRule::Conservative.evaluate(x, m, sigma)
}

fn check_dims(x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but responses have {}",
            x.rows(),
            y.rows()
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Applies `rule` to the spectrum of `m` and returns `(r̂, V₀, threshold, spectrum)`.
fn leading_right_subspace(m: &DMatrix<f64>, rule: RankRule) -> Result<(usize, DenseMatrix, f64, Vec<f64>)> {
    let (_, s, v) = svd_sorted(m);
    let (r_hat, threshold) = match rule {
        RankRule::Threshold { sigma, eta } => {
            let thr = sigma * eta;
            let r = s.iter().take_while(|&&sv| sv >= thr).count();
            if r == 0 {
                return Err(Error::RankZero { threshold: thr });
            }
            (r, thr)
        }
        RankRule::Fixed(r) => {
            if r == 0 || r > s.len() {
                return Err(Error::RankOutOfRange { requested: r, max: s.len() });
            }
            (r, 0.0)
        }
    };
    let v0 = DenseMatrix::wrap(v.columns(0, r_hat).into_owned());
    Ok((r_hat, v0, threshold, s))
}

/// Initializer exploiting low rank: spectrum of `PY`.
pub fn init_low_rank(x: &DenseMatrix, y: &DenseMatrix, sigma: f64, eta: f64) -> Result<InitResult> {
    check_positive("sigma", sigma)?;
    check_positive("eta", eta)?;
    init_low_rank_with(x, y, RankRule::Threshold { sigma, eta })
}

pub fn init_low_rank_with(x: &DenseMatrix, y: &DenseMatrix, rule: RankRule) -> Result<InitResult> {
    check_dims(x, y)?;
    let basis = column_space_basis(x.as_dmatrix());
    let py = &basis * (basis.transpose() * y.as_dmatrix());
    let (r_hat, v0, threshold_used, spectrum) = leading_right_subspace(&py, rule)?;
    Ok(InitResult {
        r_hat,
        v0,
        method: InitMethod::LowRank,
        threshold_used,
        sigma_used: rule_sigma(rule),
        spectrum,
        gpls_invocations: 0,
    })
}

fn rule_sigma(rule: RankRule) -> f64 {
    match rule {
        RankRule::Threshold { sigma, .. } => sigma,
        RankRule::Fixed(_) => f64::NAN,
    }
}

/// Initializer exploiting row sparsity: group lasso on the full response,
/// then the spectrum of `XA₀`.
pub fn init_sparse(
    x: &DenseMatrix,
    y: &DenseMatrix,
    sigma: f64,
    lambda0: f64,
    eta_rule: EtaRule,
) -> Result<InitResult> {
    check_positive("sigma", sigma)?;
    init_sparse_with(x, y, lambda0, SparseRank::Eta { sigma, rule: eta_rule }, &GplsOptions::default())
}

/// Rank rule for the sparse initializer; `η` may depend on `A₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparseRank {
    Eta { sigma: f64, rule: EtaRule },
    Fixed(usize),
}

pub fn init_sparse_with(
    x: &DenseMatrix,
    y: &DenseMatrix,
    lambda0: f64,
    rank: SparseRank,
    options: &GplsOptions,
) -> Result<InitResult> {
    check_dims(x, y)?;
    check_positive("lambda0", lambda0)?;
    let problem = GplsProblem::new(x, y, PenaltySpec::group_lasso(lambda0)?)?;
    let a0 = solve_gpls(&problem, options)?.b;
    let support = a0.row_support();
    if support.is_empty() {
        return Err(Error::ZeroSolution { lambda: lambda0 });
    }
    let xa0 = x.as_dmatrix() * a0.as_dmatrix();
    let rule = match rank {
        SparseRank::Fixed(r) => RankRule::Fixed(r),
        SparseRank::Eta { sigma, rule } => {
            let eta = match rule {
                EtaRule::Fixed(eta) => eta,
                EtaRule::FromSupport => {
                    let p = x.cols() as f64;
                    (support.len() as f64 * (y.cols() as f64 + 4.0 * p.ln())).sqrt()
                }
            };
            check_positive("eta", eta)?;
            RankRule::Threshold { sigma, eta }
        }
    };
    let (r_hat, v0, threshold_used, spectrum) = leading_right_subspace(&xa0, rule)?;
    Ok(InitResult {
        r_hat,
        v0,
        method: InitMethod::Sparse,
        threshold_used,
        sigma_used: rule_sigma(rule),
        spectrum,
        gpls_invocations: 1,
    })
}

/// `σ_min(VᵀV₀)`: cosine of the largest principal angle between the two
/// column spaces.
pub fn subspace_overlap(v: &DenseMatrix, v0: &DenseMatrix) -> Result<f64> {
    if v.rows() != v0.rows() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces live in R^{} and R^{}",
            v.rows(),
            v0.rows()
        )));
    }
    let cross = v.transpose().matmul(v0)?;
    let s = singular_values(&cross);
    Ok(s.last().copied().unwrap_or(0.0).clamp(0.0, 1.0))
}
