use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no Stieltjes branch satisfies Im m * Im z > 0 at z = {z} (z on the spectral cut)")]
    BranchFailure { z: Complex64 },

    #[error("derivative denominator vanishes at z = {z} (|den| = {denominator:e})")]
    SingularDerivative { z: Complex64, denominator: f64 },

    #[error("quadrature did not converge: node doubling changed the result by {change:e} (tolerance {tolerance:e})")]
    NonConvergent { change: f64, tolerance: f64 },

    #[error("ill-conditioned system: relative pivot {pivot:e} at row {row}")]
    IllConditioned { row: usize, pivot: f64 },

    #[error("fixed-point iteration failed: {0}")]
    NoConvergence(String),

    #[error("variance formula evaluated to a negative value ({0:e})")]
    NegativeVariance(f64),

    #[error("signature of user {user} has zero norm")]
    ZeroSignature { user: usize },

    #[error("Hermitian solve broke down at pivot {row} (value {pivot:e})")]
    SolveFailure { row: usize, pivot: f64 },

    #[error("Krylov sequence degenerates: requested {requested} stages, effective rank {rank}")]
    DegenerateKrylov { requested: usize, rank: usize },

    #[error("receiver vector is zero")]
    ZeroReceiver,

    #[error("eigendecomposition failed: {0}")]
    EigFailure(String),

    #[error("x is not spread: max |x_i| = {max_entry:e} exceeds {bound:e}")]
    XNotSpread { max_entry: f64, bound: f64 },

    #[error("no prediction available: {0}")]
    PredictionUnavailable(String),

    #[error("statistic evaluated to a non-finite value ({0})")]
    NonFinite(f64),

    #[error("variance {0:e} is not positive")]
    DegenerateVariance(f64),

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    TrialFailed {
        seed: u64,
        trial: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
