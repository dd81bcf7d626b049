//! Batches of independent runs, parameter sweeps and scaling fits.
//!
//! Trial `t` of cell `c` under master seed `s` runs with seed
//! `derive_seed(s, c, t)` (see [`crate::bitvec::derive_seed`]). Trials are
//! scheduled on the ambient rayon pool but collected in trial order, and
//! every statistic is computed from the sorted sample, so results do not
//! depend on the number of workers.

mod fit;
mod regimes;
mod sweep;

pub use fit::{fit_scaling, ScalingFit, ScalingModel, ScalingPoint};
pub use regimes::{
    compare_regimes, r_large, r_small, RegimeComparison, RegimeMethod, RegimeOutcome,
    RegimeProcess, RegimeSpec,
};
pub use sweep::{
    sweep, Axis, CellParams, SkippedCell, SweepOutcome, SweepSpec, DEFAULT_MAX_EVALUATIONS,
};

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bitvec::derive_seed;
use crate::ea::{run, EaError, RunConfig};
use crate::oracle::OracleError;
use crate::problems::{Family, Instance, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("malformed sweep file: {0}")]
    Parse(String),
    #[error("rule for {axis} ({rule:?}) failed: {message}")]
    Rule {
        axis: &'static str,
        rule: String,
        message: String,
    },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("scaling fit needs at least 3 cells, got {0}")]
    TooFewCells(usize),
    #[error("scaling fit rejected: {0}")]
    Degenerate(String),
    #[error("scaling fit rejected: {0} cell(s) have censored means; pass them as lower bounds explicitly")]
    Censored(usize),
    #[error(transparent)]
    Ea(#[from] EaError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Summary of the evaluation counts of a batch of runs.
///
/// When `censored > 0` the statistics include runs stopped at the budget
/// and are lower-bound estimates of the true hitting-time statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub family: Family,
    pub n: usize,
    pub k: usize,
    pub d: Option<usize>,
    pub r: Option<usize>,
    pub m: Option<usize>,
    pub trials: u64,
    pub censored: u64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub stddev: f64,
    /// `stddev / sqrt(trials)`.
    pub stderr: f64,
    pub q05: f64,
    pub q95: f64,
    pub max_evals: u64,
}

/// Quantile by linear interpolation between order statistics (the common
/// "type 7" definition). `sorted` must be non-empty and ascending.
fn quantile(sorted: &[u64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo] as f64, sorted[hi] as f64);
    a + (h - lo as f64) * (b - a)
}

impl TrialStats {
    /// Aggregates per-run evaluation counts; order of `evaluations` is
    /// irrelevant.
    pub fn from_runs(
        inst: &Instance,
        evaluations: &[u64],
        censored: u64,
        max_evals: u64,
    ) -> Result<Self, ExperimentError> {
        if evaluations.is_empty() {
            return Err(ExperimentError::NoTrials);
        }
        let mut sorted = evaluations.to_vec();
        sorted.sort_unstable();
        let t = sorted.len() as f64;
        let sum: u128 = sorted.iter().map(|&e| e as u128).sum();
        let mean = sum as f64 / t;
        let stddev = if sorted.len() > 1 {
            let ss: f64 = sorted.iter().map(|&e| (e as f64 - mean).powi(2)).sum();
            (ss / (t - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(TrialStats {
            family: inst.family(),
            n: inst.n(),
            k: inst.k(),
            d: inst.d(),
            r: None,
            m: inst.m(),
            trials: sorted.len() as u64,
            censored,
            mean,
            median: quantile(&sorted, 0.5),
            stddev,
            stderr: stddev / t.sqrt(),
            q05: quantile(&sorted, 0.05),
            q95: quantile(&sorted, 0.95),
            max_evals,
        })
    }

    /// Normal-approximation 95% interval `mean ± 1.96 se`.
    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - 1.96 * self.stderr,
            self.mean + 1.96 * self.stderr,
        )
    }

    /// Whether the statistics are lower-bound estimates.
    pub fn is_lower_bound(&self) -> bool {
        self.censored > 0
    }
}

pub const CSV_HEADER: &str =
    "family,n,k,d,r,m,trials,censored,mean,median,stddev,stderr,q05,q95,max_evals";

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV with a header row, one row per cell; absent parameters are empty.
pub fn to_csv(rows: &[TrialStats]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.family,
            s.n,
            s.k,
            opt(s.d),
            opt(s.r),
            opt(s.m),
            s.trials,
            s.censored,
            s.mean,
            s.median,
            s.stddev,
            s.stderr,
            s.q05,
            s.q95,
            s.max_evals
        );
    }
    out
}

/// The same records as [`to_csv`], one JSON object per line.
pub fn to_jsonl(rows: &[TrialStats]) -> String {
    let mut out = String::new();
    for s in rows {
        out.push_str(&serde_json::to_string(s).expect("stats serialize"));
        out.push('\n');
    }
    out
}

/// Runs `trials` independent runs of cell `cell` and aggregates them.
/// Trials not yet started when `deadline` passes are dropped; the first
/// trial always runs.
pub(crate) fn run_cell(
    inst: &Instance,
    trials: u64,
    master_seed: u64,
    cell: u64,
    max_evaluations: u64,
    deadline: Option<Instant>,
) -> Result<TrialStats, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| {
            if t > 0 && deadline.is_some_and(|d| Instant::now() > d) {
                return Ok(None);
            }
            let cfg = RunConfig::new(derive_seed(master_seed, cell, t), max_evaluations);
            run(inst, &cfg).map(|r| Some((r.evaluations, r.censored())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let done: Vec<(u64, bool)> = runs.into_iter().flatten().collect();
    let evals: Vec<u64> = done.iter().map(|r| r.0).collect();
    let censored = done.iter().filter(|r| r.1).count() as u64;
    TrialStats::from_runs(inst, &evals, censored, max_evaluations)
}

/// `trials` independent runs from uniformly random starts, trial `t` seeded
/// with `derive_seed(master_seed, 0, t)`.
pub fn run_trials(
    inst: &Instance,
    trials: u64,
    master_seed: u64,
    max_evaluations: u64,
) -> Result<TrialStats, ExperimentError> {
    run_cell(inst, trials, master_seed, 0, max_evaluations, None)
}
