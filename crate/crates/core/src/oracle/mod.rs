//! Ground truth independent of the EA: exhaustive objective evaluation and
//! exact expected first hitting times of absorbing Markov chains.

mod brute;
mod chain;
mod solve;

pub use brute::{brute_force_f, brute_force_optimum, ENUMERATION_CAP, MAX_BRUTE_N, MAX_BRUTE_ONES};
pub use chain::{
    binomial_pmf, full_chain_efht, lumped_chain_efht, mutation_delta_pmf, ChainSolution,
    InitialDistribution, LumpedKind, Precision, StateSpace, MAX_FULL_N, MAX_LUMPED_N,
};

use thiserror::Error;

use crate::problems::ProblemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("enumeration of {count} deletion subsets exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },
    #[error("{what} = {value} exceeds the oracle limit {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("invalid chain parameters: {0}")]
    InvalidParameters(String),
    #[error("absorption is unreachable from state {state}")]
    Unreachable { state: usize },
    #[error("transition row {state} sums to {sum}, not 1")]
    RowSum { state: usize, sum: f64 },
    #[error("linear solve residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
