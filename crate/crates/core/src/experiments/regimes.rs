//! Hitting times on both sides of the `d = n/2 + r` threshold.

use rayon::prelude::*;
use serde::Serialize;

use super::{run_trials, ExperimentError};
use crate::bitvec::derive_seed;
use crate::ea::{run_accept_all, RunConfig};
use crate::oracle::{lumped_chain_efht, InitialDistribution, LumpedKind, Precision};
use crate::problems::build_onemax;

/// `floor(sqrt(n))`, the small-`r` regime (coefficient 1).
pub fn r_small(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// `floor(3 sqrt(n ln n))`, the large-`r` regime (coefficient 3).
pub fn r_large(n: usize) -> usize {
    (3.0 * (n as f64 * (n as f64).ln()).sqrt()).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeProcess {
    /// The walk accepting every offspring, until more than `d` ones.
    AcceptAllWalk,
    /// The (1+1)-EA on deletion-robust OneMax with budget `k`.
    DeletionOneMax { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeMethod {
    /// Expected evaluations from the one-count chain (uniform start).
    ExactChain,
    /// Mean evaluations over simulated runs.
    Simulation {
        trials: u64,
        master_seed: u64,
        max_evaluations: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeSpec {
    pub process: RegimeProcess,
    pub n: usize,
    /// `d = floor(n/2) + r`, clamped to the largest admissible value.
    pub r: usize,
    pub method: RegimeMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeOutcome {
    pub n: usize,
    pub r: usize,
    pub d: usize,
    /// `floor(n/2) + r` exceeded the admissible range and `d` was lowered
    /// to its maximum.
    pub clamped: bool,
    pub mean_evaluations: f64,
    /// Simulated runs hit the budget; the mean is a lower bound.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeComparison {
    pub small: RegimeOutcome,
    pub large: RegimeOutcome,
    /// `large.mean_evaluations / small.mean_evaluations`.
    pub ratio: f64,
}

fn evaluate(spec: &RegimeSpec) -> Result<RegimeOutcome, ExperimentError> {
    let n = spec.n;
    if n == 0 {
        return Err(ExperimentError::InvalidSpec("n must be at least 1".into()));
    }
    let max_d = match spec.process {
        RegimeProcess::AcceptAllWalk => n - 1,
        RegimeProcess::DeletionOneMax { k } => {
            if k == 0 || k > n {
                return Err(ExperimentError::InvalidSpec(format!(
                    "requires 1 <= k <= n, got n={n} k={k}"
                )));
            }
            k - 1
        }
    };
    let wanted = n / 2 + spec.r;
    let d = wanted.min(max_d);
    let (mean_evaluations, lower_bound) = match (spec.process, spec.method) {
        (process, RegimeMethod::ExactChain) => {
            let (kind, k) = match process {
                RegimeProcess::AcceptAllWalk => (LumpedKind::AcceptAllWalk, n),
                RegimeProcess::DeletionOneMax { k } => (LumpedKind::DeletionOneMax, k),
            };
            let sol = lumped_chain_efht(
                kind,
                n,
                k,
                d,
                InitialDistribution::Uniform,
                Precision::Float,
            )?;
            (sol.mean_evaluations, false)
        }
        (
            RegimeProcess::DeletionOneMax { k },
            RegimeMethod::Simulation {
                trials,
                master_seed,
                max_evaluations,
            },
        ) => {
            let stats = run_trials(
                &build_onemax(n, k, d)?.into(),
                trials,
                master_seed,
                max_evaluations,
            )?;
            (stats.mean, stats.censored > 0)
        }
        (
            RegimeProcess::AcceptAllWalk,
            RegimeMethod::Simulation {
                trials,
                master_seed,
                max_evaluations,
            },
        ) => {
            if trials == 0 {
                return Err(ExperimentError::NoTrials);
            }
            let runs = (0..trials)
                .into_par_iter()
                .map(|t| {
                    run_accept_all(
                        n,
                        d,
                        &RunConfig::new(derive_seed(master_seed, 0, t), max_evaluations),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let sum: u128 = runs.iter().map(|r| r.evaluations as u128).sum();
            (
                sum as f64 / trials as f64,
                runs.iter().any(|r| r.censored()),
            )
        }
    };
    Ok(RegimeOutcome {
        n,
        r: spec.r,
        d,
        clamped: d < wanted,
        mean_evaluations,
        lower_bound,
    })
}

/// Ratio of the expected running time in the large-`r` regime to that in
/// the small-`r` regime. Both specs must describe the same process.
pub fn compare_regimes(
    small: &RegimeSpec,
    large: &RegimeSpec,
) -> Result<RegimeComparison, ExperimentError> {
    if small.process != large.process {
        return Err(ExperimentError::InvalidSpec(
            "both regimes must use the same process".into(),
        ));
    }
    let small = evaluate(small)?;
    let large = evaluate(large)?;
    Ok(RegimeComparison {
        ratio: large.mean_evaluations / small.mean_evaluations,
        small,
        large,
    })
}
