//! Common entropy of a pair of correlated finite sources and the codes that
//! realize it.
//!
//! The central quantity is `G(X;Y)`, the smallest entropy `H(W)` of a random
//! variable `W` that renders `X` and `Y` conditionally independent
//! (`X → W → Y`). Minimizing `H(W)` over exact nonnegative factorizations of
//! the joint pmf is a concave minimization over a nonconvex set, so this crate
//! pairs every numeric route with an independent one:
//!
//! - [`solver::g_closed_form_2x2`] and [`solver::g_closed_form_sbes`] evaluate
//!   the two families with known explicit answers;
//! - [`solver::g_general`] is a multi-start penalized descent over
//!   factorizations, polished by the support-reduction moves in
//!   [`factorization`];
//! - [`oracle::g_oracle_grid`] enumerates support patterns and grids the
//!   remaining free parameters, giving an upper bound that is independent of
//!   the descent path.
//!
//! On top of the minimization sit the operational pieces: per-letter values of
//! multiletter instances ([`multiletter`]), the Wyner quantity and the binary
//! erasure channel simulation region ([`wyner`]), and prefix-free simulation
//! codes with exact-generation checks and a reproducible sampler
//! ([`simcode`]).

use thiserror::Error;

pub mod factorization;
pub mod multiletter;
pub mod oracle;
pub mod prob;
pub mod simcode;
pub mod solver;
pub mod wyner;

pub use factorization::MarkovFactorization;
pub use prob::{Dist, JointPmf};
pub use solver::{SolveConfig, SolveReport};

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative entry {value} at ({row},{col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("probability mass sums to {sum}, expected 1")]
    MassViolation { sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("{what} = {value} out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("size budget exceeded: {cells} cells > {budget}")]
    SizeBudget { cells: usize, budget: usize },

    #[error("alphabet too large: {0}")]
    AlphabetTooLarge(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
