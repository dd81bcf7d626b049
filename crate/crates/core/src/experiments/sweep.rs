//! Parameter grids over the builder families.
//!
//! A sweep file is TOML:
//!
//! ```toml
//! family = "onemax"
//! n = [64, 128, 256, 512]
//! d = "floor(math::sqrt(n))"   # a rule, evaluated per cell
//! k = "2 * d"
//! trials = 500
//! master_seed = 7
//! max_evaluations = 1000000000  # optional, this is the default
//! cell_time_limit_secs = 600    # optional wall-clock guard per cell
//! ```
//!
//! Each of `n`, `k`, `d`, `r`, `m` is an integer, a list of integers, or a
//! rule string evaluated with `evalexpr` where the other parameters of the
//! cell are variables. Lists are crossed in the order `n, r, d, k, m`;
//! rules are then resolved in whatever order their variables allow. `r`
//! stands for `d = floor(n/2) + r` and excludes `d`. Rule results must be
//! non-negative integers (a float is accepted when it is integral).
//!
//! Cells whose parameters violate the builder's preconditions are skipped
//! and reported with the reason, never silently dropped.

use std::time::{Duration, Instant};

use evalexpr::{ContextWithMutableVariables, EvalexprError, HashMapContext, Value};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_cell, ExperimentError, TrialStats};
use crate::problems::{
    build_binval, build_onemax, build_thm10_highk, build_thm10_k1, build_thm10_midk,
    build_thm8_plateau, Family, Instance, ProblemError,
};

pub const DEFAULT_MAX_EVALUATIONS: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    One(u64),
    List(Vec<u64>),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: Family,
    pub n: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Axis>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_time_limit_secs: Option<u64>,
}

fn default_max_evaluations() -> u64 {
    DEFAULT_MAX_EVALUATIONS
}

/// Parameters of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellParams {
    pub family: Family,
    pub n: usize,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub r: Option<usize>,
    pub m: Option<usize>,
}

impl CellParams {
    pub fn build(&self) -> Result<Instance, ProblemError> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| {
                ProblemError::InvalidParameters(format!("{} requires {name}", self.family))
            })
        };
        Ok(match self.family {
            Family::OneMax => build_onemax(self.n, need(self.k, "k")?, need(self.d, "d")?)?.into(),
            Family::BinVal => build_binval(self.n, need(self.k, "k")?, need(self.d, "d")?)?.into(),
            Family::Thm8 => build_thm8_plateau(self.n, need(self.d, "d")?)?.into(),
            Family::Thm10K1 => build_thm10_k1(self.n, need(self.m, "m")?)?.into(),
            Family::Thm10MidK => {
                build_thm10_midk(self.n, need(self.k, "k")?, need(self.m, "m")?)?.into()
            }
            Family::Thm10HighK => build_thm10_highk(self.n, need(self.k, "k")?)?.into(),
            Family::Linear | Family::WorstCase => {
                return Err(ProblemError::InvalidParameters(format!(
                    "{} needs explicit weights and cannot be swept",
                    self.family
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedCell {
    pub cell: CellParams,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<TrialStats>,
    pub skipped: Vec<SkippedCell>,
}

const AXES: [&str; 5] = ["n", "r", "d", "k", "m"];

/// Parameters the family's builder takes, besides `n`.
fn family_axes(family: Family) -> Result<&'static [&'static str], ExperimentError> {
    Ok(match family {
        Family::OneMax | Family::BinVal => &["k", "d"],
        Family::Thm8 => &["d"],
        Family::Thm10K1 => &["m"],
        Family::Thm10MidK => &["k", "m"],
        Family::Thm10HighK => &["k"],
        Family::Linear | Family::WorstCase => {
            return Err(ExperimentError::InvalidSpec(format!(
                "family {family} needs explicit weights; use an instance file"
            )))
        }
    })
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep specs serialize")
    }

    fn axis(&self, name: &str) -> Option<&Axis> {
        match name {
            "n" => Some(&self.n),
            "k" => self.k.as_ref(),
            "d" => self.d.as_ref(),
            "r" => self.r.as_ref(),
            "m" => self.m.as_ref(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::NoTrials);
        }
        if self.max_evaluations == 0 {
            return Err(ExperimentError::InvalidSpec(
                "max_evaluations must be at least 1".into(),
            ));
        }
        let wanted = family_axes(self.family)?;
        let uses_d = wanted.contains(&"d");
        if self.r.is_some() && self.d.is_some() {
            return Err(ExperimentError::InvalidSpec(
                "give either d or r (d = floor(n/2) + r), not both".into(),
            ));
        }
        if self.r.is_some() && !uses_d {
            return Err(ExperimentError::InvalidSpec(format!(
                "family {} has no d, so r is meaningless",
                self.family
            )));
        }
        for name in &AXES[1..] {
            let given = self.axis(name).is_some();
            let used = wanted.contains(name) || (*name == "r" && uses_d);
            if given && !used {
                return Err(ExperimentError::InvalidSpec(format!(
                    "family {} does not take {name}",
                    self.family
                )));
            }
            if !given && wanted.contains(name) && !(*name == "d" && self.r.is_some()) {
                return Err(ExperimentError::InvalidSpec(format!(
                    "family {} requires {name}",
                    self.family
                )));
            }
        }
        for name in AXES {
            if let Some(Axis::List(v)) = self.axis(name) {
                if v.is_empty() {
                    return Err(ExperimentError::InvalidSpec(format!(
                        "grid for {name} is empty"
                    )));
                }
            }
        }
        if matches!(self.n, Axis::Rule(_)) {
            return Err(ExperimentError::InvalidSpec(
                "n must be an integer or a list".into(),
            ));
        }
        Ok(())
    }

    /// Every cell of the grid in a fixed order, with its parameters
    /// resolved.
    pub fn cells(&self) -> Result<Vec<CellParams>, ExperimentError> {
        self.validate()?;
        // partial assignments: (axis, value) pairs
        let mut partial: Vec<Vec<(&'static str, u64)>> = vec![Vec::new()];
        let mut rules: Vec<(&'static str, &str)> = Vec::new();
        for name in AXES {
            match self.axis(name) {
                None => {}
                Some(Axis::One(v)) => partial.iter_mut().for_each(|p| p.push((name, *v))),
                Some(Axis::List(vs)) => {
                    partial = partial
                        .into_iter()
                        .flat_map(|p| {
                            vs.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push((name, v));
                                q
                            })
                        })
                        .collect();
                }
                Some(Axis::Rule(rule)) => rules.push((name, rule)),
            }
        }
        partial
            .into_iter()
            .map(|mut assigned| {
                resolve_rules(&mut assigned, &rules)?;
                let get = |name: &str| {
                    assigned
                        .iter()
                        .find(|(a, _)| *a == name)
                        .map(|&(_, v)| v as usize)
                };
                let n = get("n").expect("n is always assigned");
                let r = get("r");
                let d = get("d").or_else(|| r.map(|r| n / 2 + r));
                Ok(CellParams {
                    family: self.family,
                    n,
                    k: get("k"),
                    d,
                    r,
                    m: get("m"),
                })
            })
            .collect()
    }
}

fn resolve_rules(
    assigned: &mut Vec<(&'static str, u64)>,
    rules: &[(&'static str, &str)],
) -> Result<(), ExperimentError> {
    let mut pending: Vec<(&'static str, &str)> = rules.to_vec();
    while !pending.is_empty() {
        let mut ctx = HashMapContext::new();
        for &(name, v) in assigned.iter() {
            ctx.set_value(name.into(), Value::from_int(v as i64))
                .expect("fresh variable");
        }
        // the implied d is visible to rules in r-sweeps
        if let (Some(n), Some(r)) = (
            assigned.iter().find(|a| a.0 == "n"),
            assigned.iter().find(|a| a.0 == "r"),
        ) {
            if !assigned.iter().any(|a| a.0 == "d") {
                let d = n.1 / 2 + r.1;
                ctx.set_value("d".into(), Value::from_int(d as i64))
                    .expect("fresh variable");
            }
        }
        let mut progressed = false;
        let mut last_error = None;
        let mut still = Vec::new();
        for &(axis, rule) in &pending {
            match evalexpr::eval_with_context(rule, &ctx) {
                Ok(v) => {
                    assigned.push((axis, rule_value(axis, rule, v)?));
                    progressed = true;
                }
                Err(e @ EvalexprError::VariableIdentifierNotFound(_)) => {
                    last_error = Some((axis, rule, e));
                    still.push((axis, rule));
                }
                Err(e) => {
                    return Err(ExperimentError::Rule {
                        axis,
                        rule: rule.to_string(),
                        message: e.to_string(),
                    })
                }
            }
        }
        if !progressed {
            let (axis, rule, e) = last_error.expect("pending rules failed");
            return Err(ExperimentError::Rule {
                axis,
                rule: rule.to_string(),
                message: e.to_string(),
            });
        }
        pending = still;
    }
    Ok(())
}

fn rule_value(axis: &'static str, rule: &str, v: Value) -> Result<u64, ExperimentError> {
    let fail = |message: String| ExperimentError::Rule {
        axis,
        rule: rule.to_string(),
        message,
    };
    match v {
        Value::Int(i) if i >= 0 => Ok(i as u64),
        Value::Float(f) if f >= 0.0 && f.fract() == 0.0 && f < 2f64.powi(63) => Ok(f as u64),
        other => Err(fail(format!(
            "expected a non-negative integer, got {other}"
        ))),
    }
}

/// Runs every valid cell of the grid on a pool of `workers` threads (the
/// global pool when `None`). Cell `c` in grid order uses stream `c` of the
/// master seed, so output depends only on the spec.
pub fn sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepOutcome, ExperimentError> {
    let cells = spec.cells()?;
    let limit = spec.cell_time_limit_secs.map(Duration::from_secs);
    let work = || -> Result<Vec<Result<TrialStats, SkippedCell>>, ExperimentError> {
        cells
            .par_iter()
            .enumerate()
            .map(|(c, cell)| {
                let inst = match cell.build() {
                    Ok(inst) => inst,
                    Err(e) => {
                        return Ok(Err(SkippedCell {
                            cell: *cell,
                            reason: e.to_string(),
                        }))
                    }
                };
                let deadline = limit.map(|l| Instant::now() + l);
                let mut stats = run_cell(
                    &inst,
                    spec.trials,
                    spec.master_seed,
                    c as u64,
                    spec.max_evaluations,
                    deadline,
                )?;
                stats.r = cell.r;
                Ok(Ok(stats))
            })
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| ExperimentError::InvalidSpec(format!("cannot start {w} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(s) => rows.push(s),
            Err(s) => skipped.push(s),
        }
    }
    Ok(SweepOutcome { rows, skipped })
}
