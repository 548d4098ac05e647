//! Sparse reduced-rank multivariate regression.
//!
//! Estimates a coefficient matrix `A` in `Y = XA + Z` that is simultaneously
//! row-sparse and low-rank. The estimator first recovers the right singular
//! subspace of `XA`, then runs a single group-penalized regression on the
//! projected responses, so only two group-regression solves are needed per
//! fit. An alternating-minimization competitor, initializers, a rank
//! selector, and a simulation harness are included.
//!
//! Module map:
//!
//! * [`matrix`]: dense matrix carrier, thin SVD, projections, Schatten norms,
//!   sparse Riesz constants.
//! * [`penalty`]: row-wise group penalties and their exact threshold maps.
//! * [`gpls`]: block coordinate descent for group-penalized least squares.
//! * [`init`]: noise-level estimate, rank and initial subspace selection.
//! * [`estimator`]: the two-stage subspace-assisted fit, response splitting,
//!   and the alternating competitor.
//! * [`simbench`]: scenario generator, metrics, tuning, benchmark tables.
//! * [`cli`]: command implementations behind the `sarrs` binary.

// `!(v > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod gpls;
pub mod init;
pub mod matrix;
pub mod penalty;
pub mod simbench;

pub use error::{Error, Result};
pub use estimator::{
    bsw_fit, resolve_init, sarrs_fit, split_responses, BswReport, FitDiagnostics, FitReport,
    InitChoice, PenaltySetting, RankChoice, ResolvedInit, SarrsConfig, Splitting,
};
pub use gpls::{default_lambda, kkt_certificate, solve_gpls, GplsOptions, GplsProblem, GplsSolution};
pub use init::{estimate_sigma, init_low_rank, init_sparse, subspace_overlap, EtaRule, InitResult};
pub use matrix::{DenseMatrix, SchattenQ, ThinSvd};
pub use penalty::{PenaltyKind, PenaltySpec};
