use thiserror::Error;

use crate::relaxation::FractionalProfile;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem with an instance, allocation or parameter set.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid basis function: {0}")]
    InvalidBasis(String),

    #[error("invalid kernel configuration: {0}")]
    InvalidConfig(String),

    /// The Poisson series did not reach its decreasing tail within the term cap,
    /// or its partial sum left the double range.
    #[error("poisson series did not converge at v = {v} after {terms} terms")]
    NonConvergent { v: f64, terms: usize },

    #[error("operation not supported for this basis: {0}")]
    UnsupportedBasis(String),

    #[error("tax function overflow at x = {x}, v = {v}")]
    Overflow { x: usize, v: f64 },

    #[error("resource {resource}: {source}")]
    AtResource {
        resource: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("frank-wolfe stopped after {iters} iterations with gap {gap:.3e}", iters = .best.iters, gap = .best.gap)]
    MaxItersExceeded { best: Box<FractionalProfile> },

    #[error("profile space too large to enumerate: {size} profiles (cap {cap})")]
    TooLarge { size: u128, cap: u128 },

    #[error("best-response dynamics did not converge within {steps} steps")]
    NotConverged { steps: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),

    #[error("partitioning system construction failed after {attempts} attempts (best P2 margin {best_margin})")]
    ConstructionFailed { attempts: usize, best_margin: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_resource(self, resource: usize) -> Self {
        Error::AtResource {
            resource,
            source: Box::new(self),
        }
    }

    /// Strips resource context and reports whether the root cause is a
    /// divergent Poisson series.
    pub fn is_non_convergent(&self) -> bool {
        match self {
            Error::NonConvergent { .. } => true,
            Error::AtResource { source, .. } => source.is_non_convergent(),
            _ => false,
        }
    }
}
