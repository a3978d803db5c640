//! Exact decomposition analysis for dynamic programs `x_{t+1} = A x_t + B u_t`
//! over a prime field GF(p), with a real-field LQR counterpart.
//!
//! The pipeline: find (or verify) an `A`-invariant direct sum
//! `X = X_1 ⊕ ... ⊕ X_r`, build the restricted and projected sub-problem
//! families, solve everything by exhaustive DP in exact rationals, and decide
//! whether the sub-problems decompose the original problem.

pub mod check;
pub mod dp;
pub mod error;
pub mod field;
pub mod generate;
pub mod invariant;
pub mod io;
pub mod lqr;
pub mod matrix;
pub mod poly;
pub mod scalar;
pub mod subproblems;
pub mod subspace;

pub use check::{check_decomposition, CheckOptions, Checker, DecompositionReport, FamilySelection, Verdict, Witness};
pub use dp::{solve, CostFunction, CostPolicy, DpInstance, Horizon, Solution};
pub use error::{Error, Result};
pub use field::PrimeField;
pub use invariant::{primary_decomposition, verify_decomposition};
pub use lqr::{block_diagonal_check, riccati_backward, RealMatrix, RiccatiSolution};
pub use matrix::MatrixFp;
pub use scalar::{CostScalar, Rational, RealScalar};
pub use subproblems::{build_bundle, Family, SubproblemBundle};
pub use subspace::{DirectSumDecomposition, Subspace};

/// Instance with exact rational costs; every verdict is computed on these.
pub type ExactInstance = DpInstance<Rational>;
pub type ExactSolution = Solution<Rational>;
/// Instance with `f64` costs for quick approximate runs.
pub type FloatInstance = DpInstance<f64>;
pub type RealMatrix64 = RealMatrix<f64>;
pub type Riccati64 = RiccatiSolution<f64>;
