//! Group-penalized multivariate least squares
//!
//! ```text
//! minimize  ‖W − XB‖²_F / 2 + Σⱼ ρ̃(‖Bⱼ‖₂; λ)
//! ```
//!
//! solved by cyclic block coordinate descent over the rows of `B`. Each row
//! update is the exact minimizer of the one-row subproblem, whose quadratic
//! coefficient is `‖X_{*j}‖²`. The residual `W − XB` is maintained
//! incrementally so a row update costs `O(n·r)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::penalty::{penalty_value, PenaltyKind, PenaltySpec};

/// Design, multivariate response, and penalty.
#[derive(Debug, Clone, Copy)]
pub struct GplsProblem<'a> {
    x: &'a DenseMatrix,
    w: &'a DenseMatrix,
    penalty: PenaltySpec,
}

impl<'a> GplsProblem<'a> {
    pub fn new(x: &'a DenseMatrix, w: &'a DenseMatrix, penalty: PenaltySpec) -> Result<Self> {
        if x.rows() != w.rows() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows but response has {}",
                x.rows(),
                w.rows()
            )));
        }
        Ok(Self { x, w, penalty })
    }

    pub fn x(&self) -> &'a DenseMatrix {
        self.x
    }

    pub fn w(&self) -> &'a DenseMatrix {
        self.w
    }

    pub fn penalty(&self) -> PenaltySpec {
        self.penalty
    }

    pub fn with_penalty(&self, penalty: PenaltySpec) -> Self {
        Self { penalty, ..*self }
    }

    /// `‖W − XB‖²_F / 2 + ρ(B; λ)`.
    pub fn objective(&self, b: &DenseMatrix) -> f64 {
        let resid = self.w.as_dmatrix() - self.x.as_dmatrix() * b.as_dmatrix();
        0.5 * resid.norm_squared() + penalty_value(b, &self.penalty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GplsOptions {
    /// Bound on the largest entrywise change over a sweep, and on the
    /// stationarity residual, for declaring convergence.
    pub tol: f64,
    /// Cap on coordinate-descent sweeps.
    pub max_iter: usize,
}

impl Default for GplsOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct GplsSolution {
    pub b: DenseMatrix,
    pub objective: f64,
    /// Total sweeps, including any group-lasso warm-up for nonconvex kinds.
    pub iterations: usize,
    pub converged: bool,
    /// Stationarity residual of `b`; for the group lasso this is
    /// [`kkt_certificate`].
    pub kkt_residual: f64,
}

/// Stateful block coordinate descent; exposes single sweeps so callers can
/// observe the objective trajectory.
#[derive(Debug, Clone)]
pub struct BcdSolver<'a> {
    problem: GplsProblem<'a>,
    col_sq: Vec<f64>,
    b: DMatrix<f64>,
    resid: DMatrix<f64>,
    sweeps: usize,
}

impl<'a> BcdSolver<'a> {
    pub fn new(problem: GplsProblem<'a>, warm_start: Option<&DenseMatrix>) -> Result<Self> {
        let x = problem.x.as_dmatrix();
        let w = problem.w.as_dmatrix();
        let (p, r) = (x.ncols(), w.ncols());
        let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
        if problem.penalty.lambda() == 0.0 {
            if let Some(j) = col_sq.iter().position(|&c| c == 0.0) {
                return Err(Error::Unidentifiable { column: j });
            }
        }
        let b = match warm_start {
            Some(b0) => {
                if b0.shape() != (p, r) {
                    return Err(Error::DimensionMismatch(format!(
                        "warm start is {:?}, expected ({p}, {r})",
                        b0.shape()
                    )));
                }
                b0.as_dmatrix().clone()
            }
            None => DMatrix::zeros(p, r),
        };
        let resid = w - x * &b;
        Ok(Self { problem, col_sq, b, resid, sweeps: 0 })
    }

    /// One cyclic pass over all rows; returns the largest entrywise change.
    pub fn sweep(&mut self) -> Result<f64> {
        let x = self.problem.x.as_dmatrix();
        let (p, r) = self.b.shape();
        let mut max_change = 0.0f64;
        let mut v = vec![0.0; r];
        for j in 0..p {
            let c = self.col_sq[j];
            let xj = x.column(j);
            if c == 0.0 {
                // Penalty level is positive here; the row minimizer is zero.
                for k in 0..r {
                    max_change = max_change.max(self.b[(j, k)].abs());
                    self.b[(j, k)] = 0.0;
                }
                continue;
            }
            for (k, vk) in v.iter_mut().enumerate() {
                *vk = self.b[(j, k)] + xj.dot(&self.resid.column(k)) / c;
            }
            let z = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let t = self.problem.penalty.threshold_norm(z, c)?;
            let scale = if z > 0.0 { t / z } else { 0.0 };
            for (k, &vk) in v.iter().enumerate() {
                let new = vk * scale;
                let delta = new - self.b[(j, k)];
                if delta != 0.0 {
                    self.resid.column_mut(k).axpy(-delta, &xj, 1.0);
                    self.b[(j, k)] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
        }
        self.sweeps += 1;
        if !max_change.is_finite() || self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iterations: self.sweeps,
                detail: format!(
                    "non-finite coefficients under {:?} at lambda {}",
                    self.problem.penalty.kind(),
                    self.problem.penalty.lambda()
                ),
            });
        }
        Ok(max_change)
    }

    pub fn objective(&self) -> f64 {
        0.5 * self.resid.norm_squared()
            + self
                .b
                .row_iter()
                .map(|row| self.problem.penalty.scalar(row.norm()))
                .sum::<f64>()
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn coefficients(&self) -> DenseMatrix {
        DenseMatrix::wrap(self.b.clone())
    }

    /// Stationarity residual of the current iterate.
    pub fn residual(&self) -> f64 {
        let grad = self.problem.x.as_dmatrix().transpose() * &self.resid;
        stationarity_residual(&grad, &self.b, &self.problem.penalty)
    }

    fn into_solution(self, converged: bool, kkt_residual: f64, extra_sweeps: usize) -> GplsSolution {
        let objective = self.objective();
        GplsSolution {
            b: DenseMatrix::wrap(self.b),
            objective,
            iterations: self.sweeps + extra_sweeps,
            converged,
            kkt_residual,
        }
    }

    /// Sweeps until both the row change and the stationarity residual are
    /// within `tol`, or `max_iter` sweeps have run.
    pub fn run(mut self, options: &GplsOptions, extra_sweeps: usize) -> Result<GplsSolution> {
        let mut last_residual = f64::INFINITY;
        while self.sweeps < options.max_iter {
            let change = self.sweep()?;
            if change <= options.tol {
                last_residual = self.residual();
                if last_residual <= options.tol || change == 0.0 {
                    let ok = last_residual <= options.tol;
                    return Ok(self.into_solution(ok, last_residual, extra_sweeps));
                }
            }
        }
        if !last_residual.is_finite() {
            last_residual = self.residual();
        }
        Ok(self.into_solution(false, last_residual, extra_sweeps))
    }
}

/// Distance of the gradient `Xᵀ(W − XB)` from the penalty's subdifferential,
/// maximized over rows.
fn stationarity_residual(grad: &DMatrix<f64>, b: &DMatrix<f64>, penalty: &PenaltySpec) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..b.nrows() {
        let g: DVector<f64> = grad.row(j).transpose();
        let row: DVector<f64> = b.row(j).transpose();
        let t = row.norm();
        let res = if t == 0.0 {
            (g.norm() - penalty.slope_at_zero()).max(0.0)
        } else {
            let u = row / t;
            let (lo, hi) = penalty.derivative_interval(t);
            let d = g.dot(&u).clamp(lo, hi);
            (g - u * d).norm()
        };
        worst = worst.max(res);
    }
    worst
}

/// Solves from a zero start (nonconvex kinds first solve the group lasso at
/// the same level and start from there).
pub fn solve_gpls(problem: &GplsProblem<'_>, options: &GplsOptions) -> Result<GplsSolution> {
    solve_gpls_warm(problem, options, None)
}

pub fn solve_gpls_warm(
    problem: &GplsProblem<'_>,
    options: &GplsOptions,
    warm_start: Option<&DenseMatrix>,
) -> Result<GplsSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    let kind = problem.penalty.kind();
    if kind != PenaltyKind::GroupLasso && warm_start.is_none() {
        let lasso = problem.with_penalty(PenaltySpec::group_lasso(problem.penalty.lambda())?);
        let start = BcdSolver::new(lasso, None)?.run(options, 0)?;
        let solver = BcdSolver::new(*problem, Some(&start.b))?;
        return solver.run(options, start.iterations);
    }
    BcdSolver::new(*problem, warm_start)?.run(options, 0)
}

/// Optimality certificate for the group lasso: the largest violation of the
/// subgradient conditions over rows. Zero at the exact minimizer.
///
/// Active rows contribute `‖gⱼ − λ Bⱼ/‖Bⱼ‖‖` (which bounds both the norm
/// mismatch `|‖gⱼ‖ − λ|` and misalignment); inactive rows `(‖gⱼ‖ − λ)₊`,
/// where `gⱼ = X_{*j}ᵀ(W − XB)`.
pub fn kkt_certificate(problem: &GplsProblem<'_>, b: &DenseMatrix) -> Result<f64> {
    if problem.penalty.kind() != PenaltyKind::GroupLasso {
        return Err(Error::NonconvexPenalty);
    }
    let x = problem.x.as_dmatrix();
    if b.shape() != (x.ncols(), problem.w.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "coefficients are {:?}, expected ({}, {})",
            b.shape(),
            x.ncols(),
            problem.w.cols()
        )));
    }
    let resid = problem.w.as_dmatrix() - x * b.as_dmatrix();
    let grad = x.transpose() * resid;
    Ok(stationarity_residual(&grad, b.as_dmatrix(), &problem.penalty))
}

/// Penalty-level rules that scale with the noise level and column norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaRule {
    /// `4σ·maxⱼ‖X_{*j}‖·(√r + √(4 log p))`, sufficient for the group lasso
    /// error bound.
    Conservative,
    /// `2σ·maxⱼ‖X_{*j}‖·(√r + 2√(log p))`, the upper end of the tuning grid.
    GridCeiling,
}

impl LambdaRule {
    pub fn evaluate(self, x: &DenseMatrix, r: usize, sigma: f64) -> Result<f64> {
        let p = x.cols();
        if r == 0 || p < 2 {
            return Err(Error::InvalidArgument(format!(
                "penalty rule needs r >= 1 and p >= 2, got r = {r}, p = {p}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let max_col = x.column_norms().into_iter().fold(0.0, f64::max);
        let log_p = (p as f64).ln();
        let rf = r as f64;
        Ok(match self {
            LambdaRule::Conservative => 4.0 * sigma * max_col * (rf.sqrt() + (4.0 * log_p).sqrt()),
            LambdaRule::GridCeiling => 2.0 * sigma * max_col * (rf.sqrt() + 2.0 * log_p.sqrt()),
        })
    }
}

/// The conservative penalty level `4σ·maxⱼ‖X_{*j}‖·(√r + √(4 log p))`.
pub fn default_lambda(x: &DenseMatrix, r: usize, sigma: f64) -> Result<f64> {
    LambdaRule::Conservative.evaluate(x, r, sigma)
}
