use thiserror::Error;

/// Errors raised by the algebra, solver and checking layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by zero in GF({0})")]
    DivisionByZero(u32),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("modulus mismatch: GF({0}) vs GF({1})")]
    ModulusMismatch(u32, u32),

    #[error("characteristic polynomial has a single irreducible factor {factor} (multiplicity {multiplicity}); no proper invariant decomposition")]
    NotDecomposable { factor: String, multiplicity: u32 },

    #[error("parts do not form a direct sum of the ambient space: {0}")]
    NotDirectSum(String),

    #[error("part {part} is not invariant under A")]
    NotInvariant { part: usize },

    #[error("cost function is not separable over the decomposition (fails at state index {state})")]
    NotSeparableCost { state: usize },

    #[error("invalid cost function: {0}")]
    InvalidCost(String),

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("input matrix is not injective (rank {rank} < {cols})")]
    NotInjective { rank: usize, cols: usize },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error("theorem violation: {0}")]
    TheoremViolation(String),

    #[error("matrix is ill-conditioned (estimated condition number {0:e})")]
    IllConditioned(f64),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("policy iteration did not terminate within {0} sweeps")]
    NotConverged(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
