use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("requested rank {requested} outside 1..={max}")]
    RankOutOfRange { requested: usize, max: usize },

    #[error("no singular value reaches the threshold {threshold:.6e}; lower eta or the noise level, or the signal is too weak")]
    RankZero { threshold: f64 },

    #[error("enumerating {count} column subsets exceeds the budget of {budget}")]
    CombinatorialBudget { count: u128, budget: u128 },

    #[error("row subproblem is nonconvex and ill-posed: curvature {curvature} times gamma {gamma} must exceed 1")]
    IllPosedSubproblem { curvature: f64, gamma: f64 },

    #[error("column {column} of the design is zero and the penalty level is zero; its row is unidentifiable")]
    Unidentifiable { column: usize },

    #[error("solver diverged after {iterations} sweeps: {detail}")]
    Diverged { iterations: usize, detail: String },

    #[error("group regression returned an all-zero solution at lambda = {lambda}; lower the penalty level")]
    ZeroSolution { lambda: f64 },

    #[error("operation requires a convex (group lasso) penalty")]
    NonconvexPenalty,

    #[error("all {attempted} fits failed: {causes}")]
    AllFitsFailed { attempted: usize, causes: String },
}

impl Error {
    /// True for failures of the numerical procedure itself, as opposed to
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::RankZero { .. }
                | Error::IllPosedSubproblem { .. }
                | Error::Unidentifiable { .. }
                | Error::Diverged { .. }
                | Error::ZeroSolution { .. }
                | Error::AllFitsFailed { .. }
        )
    }
}
