//! The (1+1)-EA and the accept-all random walk.
//!
//! Running time is counted in fitness evaluations: one for the initial
//! solution plus one per iteration, whether or not the offspring differs
//! from its parent. The algorithm itself has no termination rule; a run ends
//! at the first optimal solution (when requested and the optimum is known)
//! or when the evaluation budget is spent, in which case the run is
//! censored.

use thiserror::Error;

use crate::bitvec::{mutate_into, sample_uniform, BitString, RandomSource};
use crate::problems::{FitnessValue, Instance, ProblemError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EaError {
    #[error("stop_on_optimum requested but the instance has no known optimum")]
    UnknownOptimum,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub seed: u64,
    pub max_evaluations: u64,
    pub stop_on_optimum: bool,
    pub record_trajectory: bool,
}

impl RunConfig {
    pub fn new(seed: u64, max_evaluations: u64) -> Self {
        RunConfig {
            seed,
            max_evaluations,
            stop_on_optimum: true,
            record_trajectory: false,
        }
    }

    pub fn with_trajectory(mut self) -> Self {
        self.record_trajectory = true;
        self
    }

    pub fn without_stop(mut self) -> Self {
        self.stop_on_optimum = false;
        self
    }

    fn validate(&self) -> Result<(), EaError> {
        if self.max_evaluations == 0 {
            return Err(EaError::InvalidConfig(
                "max_evaluations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryPoint {
    pub evaluation: u64,
    pub ones: usize,
    /// `None` for the accept-all walk, which has no fitness.
    pub fitness: Option<FitnessValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub evaluations: u64,
    pub hit_optimum: bool,
    pub final_solution: BitString,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl RunResult {
    pub fn censored(&self) -> bool {
        !self.hit_optimum
    }
}

/// Log-spaced checkpoints: every evaluation up to 16, then growth by 1/8.
struct Recorder {
    points: Option<Vec<TrajectoryPoint>>,
    next: u64,
}

impl Recorder {
    fn new(enabled: bool) -> Self {
        Recorder {
            points: enabled.then(Vec::new),
            next: 1,
        }
    }

    fn offer(
        &mut self,
        evaluation: u64,
        x: &BitString,
        fitness: Option<&FitnessValue>,
        force: bool,
    ) {
        let Some(points) = self.points.as_mut() else {
            return;
        };
        if evaluation < self.next && !force {
            return;
        }
        if points.last().map(|p| p.evaluation) == Some(evaluation) {
            return;
        }
        points.push(TrajectoryPoint {
            evaluation,
            ones: x.ones(),
            fitness: fitness.cloned(),
        });
        while self.next <= evaluation {
            self.next = if self.next < 16 {
                self.next + 1
            } else {
                self.next + self.next.div_ceil(8)
            };
        }
    }
}

/// One run of the (1+1)-EA from a uniformly random initial solution.
/// Offspring replace the parent when their fitness is at least as good.
pub fn run(inst: &Instance, cfg: &RunConfig) -> Result<RunResult, EaError> {
    cfg.validate()?;
    if cfg.stop_on_optimum && inst.optimum_value().is_none() {
        return Err(EaError::UnknownOptimum);
    }
    let stop = cfg.stop_on_optimum;
    let mut rng = RandomSource::new(cfg.seed);
    let n = inst.n();
    let mut x = sample_uniform(n, &mut rng).expect("instances have n >= 1");
    let mut fx = inst.fitness(&x)?;
    let mut evaluations = 1u64;
    let mut rec = Recorder::new(cfg.record_trajectory);
    rec.offer(evaluations, &x, Some(&fx), false);

    let mut hit = stop && inst.is_optimal_fitness(&fx)?;
    let mut y = x.clone();
    while !hit && evaluations < cfg.max_evaluations {
        mutate_into(&x, &mut y, &mut rng);
        let fy = inst.fitness(&y)?;
        evaluations += 1;
        if fy >= fx {
            std::mem::swap(&mut x, &mut y);
            fx = fy;
            hit = stop && inst.is_optimal_fitness(&fx)?;
        }
        rec.offer(evaluations, &x, Some(&fx), false);
    }
    if !stop {
        hit = inst.optimum_value().is_some() && inst.is_optimal_fitness(&fx)?;
    }
    rec.offer(evaluations, &x, Some(&fx), true);
    Ok(RunResult {
        evaluations,
        hit_optimum: hit,
        final_solution: x,
        trajectory: rec.points,
    })
}

/// The walk that accepts every offspring, run until a solution with more
/// than `d` ones appears (or the budget is spent). With
/// `stop_on_optimum = false` the walk always uses the full budget.
pub fn run_accept_all(n: usize, d: usize, cfg: &RunConfig) -> Result<RunResult, EaError> {
    cfg.validate()?;
    if d >= n {
        return Err(EaError::InvalidConfig(format!(
            "accept-all walk requires 0 <= d < n, got n={n} d={d}"
        )));
    }
    let mut rng = RandomSource::new(cfg.seed);
    let mut x = sample_uniform(n, &mut rng).expect("n >= 1");
    let mut evaluations = 1u64;
    let mut rec = Recorder::new(cfg.record_trajectory);
    rec.offer(evaluations, &x, None, false);
    let mut y = x.clone();
    let done = |x: &BitString| cfg.stop_on_optimum && x.ones() > d;
    while !done(&x) && evaluations < cfg.max_evaluations {
        mutate_into(&x, &mut y, &mut rng);
        std::mem::swap(&mut x, &mut y);
        evaluations += 1;
        rec.offer(evaluations, &x, None, false);
    }
    rec.offer(evaluations, &x, None, true);
    Ok(RunResult {
        evaluations,
        hit_optimum: x.ones() > d,
        final_solution: x,
        trajectory: rec.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_onemax, build_thm8_plateau, build_worst, parse_rational};

    fn mean_evals(inst: &Instance, runs: u64, seed0: u64) -> (f64, f64) {
        let v: Vec<f64> = (0..runs)
            .map(|s| {
                run(inst, &RunConfig::new(seed0 + s, u64::MAX))
                    .unwrap()
                    .evaluations as f64
            })
            .collect();
        let m = v.iter().sum::<f64>() / runs as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (runs - 1) as f64;
        (m, (var / runs as f64).sqrt())
    }

    #[test]
    fn single_bit_onemax_mean() {
        let inst: Instance = build_onemax(1, 1, 0).unwrap().into();
        let (m, se) = mean_evals(&inst, 100_000, 0);
        assert!((m - 1.5).abs() < 3.0 * se, "{m} ± {se}");
        for s in 0..100 {
            let r = run(&inst, &RunConfig::new(s, 10)).unwrap();
            assert!(r.evaluations == 1 || r.evaluations == 2);
            assert!(r.hit_optimum);
        }
    }

    #[test]
    fn immediate_hit_with_budget_one() {
        let inst: Instance = build_onemax(1, 1, 0).unwrap().into();
        let mut seen = false;
        for s in 0..50 {
            let r = run(&inst, &RunConfig::new(s, 1)).unwrap();
            assert_eq!(r.evaluations, 1);
            if r.final_solution.ones() == 1 {
                assert!(r.hit_optimum);
                seen = true;
            } else {
                assert!(!r.hit_optimum);
            }
        }
        assert!(seen);
    }

    #[test]
    fn budget_censors() {
        let inst: Instance = build_thm8_plateau(20, 9).unwrap().into();
        let r = run(&inst, &RunConfig::new(1, 50)).unwrap();
        assert_eq!(r.evaluations, 50);
        assert!(!r.hit_optimum);
        assert!(r.censored());
    }

    #[test]
    fn unknown_optimum_requires_censored_mode() {
        let w = vec![vec![parse_rational("1").unwrap(); 4]];
        let inst: Instance = build_worst(w, 2, None).unwrap().into();
        assert_eq!(
            run(&inst, &RunConfig::new(1, 100)),
            Err(EaError::UnknownOptimum)
        );
        let r = run(&inst, &RunConfig::new(1, 100).without_stop()).unwrap();
        assert_eq!(r.evaluations, 100);
        assert!(!r.hit_optimum);
        assert!(matches!(
            run(&inst, &RunConfig::new(1, 0).without_stop()),
            Err(EaError::InvalidConfig(_))
        ));
    }

    #[test]
    fn runs_are_deterministic() {
        let inst: Instance = build_onemax(40, 20, 5).unwrap().into();
        let cfg = RunConfig::new(1234, 1_000_000).with_trajectory();
        assert_eq!(run(&inst, &cfg).unwrap(), run(&inst, &cfg).unwrap());
    }

    #[test]
    fn elitism_and_feasibility_persist() {
        let inst: Instance = build_thm8_plateau(24, 6).unwrap().into();
        for seed in 0..20 {
            let cfg = RunConfig::new(seed, 20_000)
                .without_stop()
                .with_trajectory();
            let traj = run(&inst, &cfg).unwrap().trajectory.unwrap();
            let mut feasible = false;
            for pair in traj.windows(2) {
                assert!(pair[1].fitness >= pair[0].fitness);
                assert!(pair[1].evaluation > pair[0].evaluation);
            }
            for p in &traj {
                if p.ones <= inst.k() {
                    feasible = true;
                }
                if feasible {
                    assert!(p.ones <= inst.k());
                }
            }
        }
    }

    #[test]
    fn trajectory_is_sparse() {
        let inst: Instance = build_thm8_plateau(20, 9).unwrap().into();
        let cfg = RunConfig::new(3, 1_000_000)
            .without_stop()
            .with_trajectory();
        let traj = run(&inst, &cfg).unwrap().trajectory.unwrap();
        assert!(traj.len() < 150, "{}", traj.len());
        assert_eq!(traj.first().unwrap().evaluation, 1);
        assert_eq!(traj.last().unwrap().evaluation, 1_000_000);
    }

    #[test]
    fn accept_all_d0_stops_on_first_one() {
        for seed in 0..200 {
            let r = run_accept_all(12, 0, &RunConfig::new(seed, 1_000)).unwrap();
            assert!(r.hit_optimum);
            assert!(r.final_solution.ones() >= 1);
        }
        assert!(run_accept_all(5, 5, &RunConfig::new(0, 10)).is_err());
    }

    #[test]
    fn accept_all_keeps_uniform_marginal() {
        // ones after t steps from a uniform start stays Binomial(n, 1/2)
        let n = 16usize;
        let runs = 20_000;
        for &t in &[1u64, 10, 100] {
            let mut total = 0.0;
            let mut total_sq = 0.0;
            for s in 0..runs {
                let cfg = RunConfig::new(s * 7919 + t, t + 1).without_stop();
                let ones = run_accept_all(n, n - 1, &cfg)
                    .unwrap()
                    .final_solution
                    .ones() as f64;
                total += ones;
                total_sq += ones * ones;
            }
            let mean = total / runs as f64;
            let var = total_sq / runs as f64 - mean * mean;
            let se = (n as f64 / 4.0 / runs as f64).sqrt();
            assert!(
                (mean - n as f64 / 2.0).abs() < 3.0 * se,
                "t={t} mean {mean}"
            );
            assert!((var - n as f64 / 4.0).abs() < 0.15, "t={t} var {var}");
        }
    }
}
