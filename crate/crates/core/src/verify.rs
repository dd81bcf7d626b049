//! The acceptance checks, shared by the test suite and `robust-ea verify`.
//!
//! Every check is deterministic: random weights, runs and drift samples are
//! all drawn from fixed seeds. [`Mode::Quick`] runs the same logic at
//! smaller sizes for smoke testing; [`Mode::Full`] runs the sizes and
//! tolerances the checks are specified at.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;

use crate::bitvec::{derive_seed, BitString, RandomSource};
use crate::drift::{
    check_bound, ladder_states, states_with_ones, verify_ladder, vmin_check, BoundKind,
    DistanceFunction,
};
use crate::experiments::{
    compare_regimes, fit_scaling, r_large, r_small, run_trials, sweep, to_csv, Axis, RegimeMethod,
    RegimeProcess, RegimeSpec, ScalingModel, ScalingPoint, SweepSpec, DEFAULT_MAX_EVALUATIONS,
};
use crate::oracle::{
    brute_force_f, brute_force_optimum, full_chain_efht, lumped_chain_efht, InitialDistribution,
    LumpedKind, Precision,
};
use crate::problems::{
    build_binval, build_linear, build_onemax, build_thm10_highk, build_thm10_k1, build_thm10_midk,
    build_thm8_plateau, parse_rational, Family, FitnessValue, Instance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    Quick,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    /// Wall-clock budget; exceeding it fails the check in full mode.
    pub limit: Option<Duration>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "objective closed form vs brute force"),
    (2, "chain vs simulation agreement"),
    (3, "O(n log n) regime for d = floor(sqrt n)"),
    (4, "accept-all threshold blow-up"),
    (5, "deletion plateau lower bound"),
    (6, "worst-case k=1 quadratic time"),
    (7, "worst-case high-k plateau"),
    (8, "drift bounds and ladder identities"),
    (9, "optimum cross-check"),
    (10, "sweep determinism across workers"),
];

type Check = Result<(bool, String), String>;

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

/// Runs one check by number (1 to 10).
pub fn run_criterion(id: u8, mode: Mode) -> CriterionResult {
    let start = Instant::now();
    let (title, outcome, limit) = match id {
        1 => (CRITERIA[0].1, objective(mode), secs(120)),
        2 => (CRITERIA[1].1, chain_vs_simulation(mode), secs(300)),
        3 => (CRITERIA[2].1, nlogn_regime(mode), secs(600)),
        4 => (CRITERIA[3].1, threshold(mode), secs(60)),
        5 => (CRITERIA[4].1, plateau(mode), secs(300)),
        6 => (CRITERIA[5].1, worst_k1(mode), secs(600)),
        7 => (CRITERIA[6].1, worst_highk(mode), secs(300)),
        8 => (CRITERIA[7].1, drift_suite(mode), secs(600)),
        9 => (CRITERIA[8].1, optimum_cross_check(mode), secs(120)),
        10 => (CRITERIA[9].1, determinism(mode), None),
        _ => ("unknown", Err(format!("no criterion {id}")), None),
    };
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(l) = limit {
        if mode == Mode::Full && elapsed > l {
            passed = false;
            detail.push_str(&format!("; exceeded the {}s budget", l.as_secs()));
        }
    }
    CriterionResult {
        id,
        title,
        passed,
        detail,
        elapsed,
        limit,
    }
}

pub fn run_all(mode: Mode) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, mode))
        .collect()
}

fn e<E: fmt::Display>(err: E) -> String {
    err.to_string()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Positive rationals `>= 1` with small denominators; roughly a third of
/// the entries repeat an earlier weight so ties are exercised.
fn random_weights(n: usize, rng: &mut RandomSource) -> Vec<BigRational> {
    let mut w: Vec<BigRational> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.gen_bool(0.3) {
            let j = rng.gen_range(0..i);
            w.push(w[j].clone());
        } else {
            let den: i64 = rng.gen_range(1..=6);
            let num: i64 = den + rng.gen_range(0..=4 * den);
            w.push(BigRational::new(BigInt::from(num), BigInt::from(den)));
        }
    }
    w
}

fn objective(mode: Mode) -> Check {
    let (max_n, vectors) = match mode {
        Mode::Full => (14, 20),
        Mode::Quick => (8, 4),
    };
    let jobs: Vec<(usize, u64)> = (1..=max_n)
        .flat_map(|n| (0..vectors).map(move |v| (n, v)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(n, v)| -> Result<(u64, Option<String>), String> {
            let mut rng = RandomSource::new(derive_seed(1, n as u64, v));
            let w = random_weights(n, &mut rng);
            let mut compared = 0u64;
            for d in 0..=4.min(n - 1) {
                // F does not involve k: brute force once per string, then
                // compare against every admissible k
                let insts = (d + 1..=n)
                    .map(|k| build_linear(w.clone(), k, d))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(e)?;
                for code in 0..1u64 << n {
                    let x = BitString::from_index(n, code).map_err(e)?;
                    let truth = brute_force_f(&insts[0], &x).map_err(e)?;
                    for inst in &insts {
                        compared += 1;
                        if inst.eval_f(&x).map_err(e)? != truth {
                            return Ok((
                                compared,
                                Some(format!("n={n} d={d} k={} x={x}", inst.k())),
                            ));
                        }
                    }
                }
            }
            Ok((compared, None))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let compared: u64 = outcomes.iter().map(|o| o.0).sum();
    match outcomes.into_iter().find_map(|o| o.1) {
        Some(bad) => Ok((false, format!("mismatch at {bad}"))),
        None => Ok((
            true,
            format!("{compared} (instance, string) pairs agree exactly for n <= {max_n}, {vectors} weight vectors per n"),
        )),
    }
}

fn chain_vs_simulation(mode: Mode) -> Check {
    let (n, k, d) = (30, 20, 5);
    let (trials, max_full) = match mode {
        Mode::Full => (10_000, 10),
        Mode::Quick => (2_000, 7),
    };
    let inst: Instance = build_onemax(n, k, d).map_err(e)?.into();
    let stats = run_trials(&inst, trials, 20_240_601, DEFAULT_MAX_EVALUATIONS).map_err(e)?;
    let chain = lumped_chain_efht(
        LumpedKind::DeletionOneMax,
        n,
        k,
        d,
        InitialDistribution::Uniform,
        Precision::Float,
    )
    .map_err(e)?;
    let z = (stats.mean - chain.mean_evaluations) / stats.stderr;
    let sim_ok = z.abs() <= 3.0;

    let cases: Vec<(usize, usize, usize)> = (1..=max_full)
        .flat_map(|n| (1..=n).flat_map(move |k| (0..k).map(move |d| (n, k, d))))
        .collect();
    let worst = cases
        .par_iter()
        .map(
            |&(n, k, d)| -> Result<(f64, (usize, usize, usize)), String> {
                let full = full_chain_efht(
                    &build_onemax(n, k, d).map_err(e)?.into(),
                    InitialDistribution::Uniform,
                )
                .map_err(e)?;
                let lumped = lumped_chain_efht(
                    LumpedKind::DeletionOneMax,
                    n,
                    k,
                    d,
                    InitialDistribution::Uniform,
                    Precision::Float,
                )
                .map_err(e)?;
                let rel = |a: f64, b: f64| {
                    if a == b {
                        0.0
                    } else {
                        (a - b).abs() / a.abs().max(b.abs())
                    }
                };
                let mut worst = rel(full.mean_evaluations, lumped.mean_evaluations);
                for (code, t) in full.efht.iter().enumerate() {
                    worst = worst.max(rel(*t, lumped.efht[(code as u64).count_ones() as usize]));
                }
                Ok((worst, (n, k, d)))
            },
        )
        .collect::<Result<Vec<_>, _>>()?;
    let (max_rel, at) = worst
        .into_iter()
        .fold((0.0, (0, 0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    let chain_ok = max_rel <= 1e-9;
    Ok((
        sim_ok && chain_ok,
        format!(
            "n={n} k={k} d={d}: simulated {:.3} ± {:.3} vs chain {:.3} (z = {z:.2}); lumped vs full over {} (n,k,d) with n <= {max_full}: max relative difference {max_rel:.2e} at {at:?}",
            stats.mean,
            stats.stderr,
            chain.mean_evaluations,
            cases.len()
        ),
    ))
}

fn nlogn_regime(mode: Mode) -> Check {
    let (ns, trials) = match mode {
        Mode::Full => (vec![64, 128, 256, 512], 500),
        // the ratio only settles for larger n; see the note on the full check
        Mode::Quick => (vec![128, 256, 512], 100),
    };
    let spec = SweepSpec {
        family: Family::OneMax,
        n: Axis::List(ns),
        k: Some(Axis::Rule("2 * d".into())),
        d: Some(Axis::Rule("floor(math::sqrt(n))".into())),
        r: None,
        m: None,
        trials,
        master_seed: 3,
        max_evaluations: DEFAULT_MAX_EVALUATIONS,
        cell_time_limit_secs: None,
    };
    let out = sweep(&spec, None).map_err(e)?;
    if !out.skipped.is_empty() || out.rows.iter().any(|r| r.censored > 0) {
        return Ok((
            false,
            format!("skipped {:?} or censored cells", out.skipped),
        ));
    }
    let ratios: Vec<f64> = out
        .rows
        .iter()
        .map(|r| r.mean / (r.n as f64 * (r.n as f64).ln()))
        .collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let points: Vec<ScalingPoint> = out.rows.iter().map(ScalingPoint::from).collect();
    let fit = fit_scaling(&points, ScalingModel::NLogN, false).map_err(e)?;
    let power = fit_scaling(&points, ScalingModel::Power, false).map_err(e)?;
    let listed: Vec<String> = out
        .rows
        .iter()
        .zip(&ratios)
        .map(|(r, q)| format!("n={}: {q:.3}", r.n))
        .collect();
    let (exact_max, exact_min) =
        exact_nlogn_band(&out.rows.iter().map(|r| r.n).collect::<Vec<_>>())?;
    Ok((
        max / min <= 2.0,
        format!(
            "mean/(n ln n) {}; max/min {:.3} (exact chain: {:.4}); fit a={:.3} (R² {:.4}), power exponent {:.3}",
            listed.join(", "),
            max / min,
            exact_max / exact_min,
            fit.a,
            fit.r_squared,
            power.exponent.unwrap_or(f64::NAN)
        ),
    ))
}

/// Largest and smallest exact `E[T]/(n ln n)` over `ns` for deletion-robust
/// OneMax with `d = floor(sqrt n)`, `k = 2d`, from the one-count chain.
///
/// The expectation is `Θ(n log n)` but approaches its limiting constant
/// slowly from below (the infeasible phase contributes about
/// `n ln(n/(2k))`), so over `n = 64..512` the exact band is slightly wider
/// than 2 and no sample size brings the simulated band under 2.
pub fn exact_nlogn_band(ns: &[usize]) -> Result<(f64, f64), String> {
    let mut ratios = Vec::new();
    for &n in ns {
        let d = (n as f64).sqrt().floor() as usize;
        let sol = lumped_chain_efht(
            LumpedKind::DeletionOneMax,
            n,
            2 * d,
            d,
            InitialDistribution::Uniform,
            Precision::Float,
        )
        .map_err(e)?;
        ratios.push(sol.mean_evaluations / (n as f64 * (n as f64).ln()));
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok((max, min))
}

fn threshold(_mode: Mode) -> Check {
    let walk = |n: usize, r: usize| RegimeSpec {
        process: RegimeProcess::AcceptAllWalk,
        n,
        r,
        method: RegimeMethod::ExactChain,
    };
    let c100 = compare_regimes(&walk(100, r_small(100)), &walk(100, r_large(100))).map_err(e)?;
    let c200 = compare_regimes(&walk(200, r_small(200)), &walk(200, r_large(200))).map_err(e)?;
    let describe = |c: &crate::experiments::RegimeComparison| {
        format!(
            "n={}: d={} -> {:.4e}, d={}{} -> {:.4e}, ratio {:.4e}",
            c.small.n,
            c.small.d,
            c.small.mean_evaluations,
            c.large.d,
            if c.large.clamped {
                " (clamped to n-1)"
            } else {
                ""
            },
            c.large.mean_evaluations,
            c.ratio
        )
    };
    Ok((
        c100.ratio >= 10.0 && c200.ratio > c100.ratio,
        format!("{}; {}", describe(&c100), describe(&c200)),
    ))
}

fn plateau(mode: Mode) -> Check {
    let (n, d, trials) = match mode {
        Mode::Full => (16, 7, 200),
        Mode::Quick => (12, 5, 100),
    };
    let inst: Instance = build_thm8_plateau(n, d).map_err(e)?.into();
    let stats = run_trials(&inst, trials, 8, DEFAULT_MAX_EVALUATIONS).map_err(e)?;
    let bound = binomial(n, d + 1) / 8.0;
    let chain = full_chain_efht(
        &build_thm8_plateau(10, 4).map_err(e)?.into(),
        InitialDistribution::Uniform,
    )
    .map_err(e)?;
    let chain_bound = binomial(10, 5) / 4.0;
    Ok((
        stats.censored == 0 && stats.mean >= bound && chain.mean_evaluations >= chain_bound,
        format!(
            "n={n} d={d}: mean {:.1} ± {:.1} over {trials} runs (bound {bound:.2}); exact chain n=10 d=4: {:.3} (bound {chain_bound})",
            stats.mean, stats.stderr, chain.mean_evaluations
        ),
    ))
}

fn worst_k1(mode: Mode) -> Check {
    let (ns, trials) = match mode {
        Mode::Full => (vec![32usize, 64, 128], 300),
        Mode::Quick => (vec![16, 32, 64], 100),
    };
    let mut parts = Vec::new();
    let mut ok = true;
    let mut scaled = Vec::new();
    for &n in &ns {
        let inst: Instance = build_thm10_k1(n, 2).map_err(e)?.into();
        let stats = run_trials(&inst, trials, 10, DEFAULT_MAX_EVALUATIONS).map_err(e)?;
        let bound = (n as f64 / 4.0).powi(2);
        ok &= stats.censored == 0 && stats.mean >= bound;
        scaled.push(stats.mean / (n * n) as f64);
        parts.push(format!(
            "n={n}: mean {:.0} (bound {bound:.0}, mean/n² {:.3})",
            stats.mean,
            stats.mean / (n * n) as f64
        ));
    }
    let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
    ok &= max / min <= 3.0;
    Ok((
        ok,
        format!("{}; band max/min {:.3}", parts.join(", "), max / min),
    ))
}

fn worst_highk(mode: Mode) -> Check {
    let (n, k, trials) = match mode {
        Mode::Full => (14, 7, 100),
        Mode::Quick => (10, 5, 50),
    };
    let inst: Instance = build_thm10_highk(n, k).map_err(e)?.into();
    let stats = run_trials(&inst, trials, 12, DEFAULT_MAX_EVALUATIONS).map_err(e)?;
    let bound = binomial(n, k) / 8.0;
    Ok((
        stats.censored == 0 && stats.mean >= bound,
        format!(
            "n={n} k={k}: mean {:.1} ± {:.1} over {trials} runs (bound {bound})",
            stats.mean, stats.stderr
        ),
    ))
}

/// Fixed weights for the general deletion drift check.
const GENERAL_WEIGHTS: [&str; 10] = ["3", "5/2", "5/2", "2", "7/4", "3/2", "6/5", "1", "1", "1"];

fn drift_suite(mode: Mode) -> Check {
    let samples = match mode {
        Mode::Full => 100_000,
        Mode::Quick => 10_000,
    };
    let mut parts = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, rep: crate::drift::DriftReport| {
        ok &= rep.passed();
        parts.push(format!(
            "{name}: {}/{} states pass (worst margin {:.1} se, implied bound {:.3e})",
            rep.states.len() - rep.flagged(),
            rep.states.len(),
            rep.worst_z().unwrap_or(f64::INFINITY),
            rep.implied_bound
        ));
    };

    let (n, k, d) = (50, 30, 10);
    let om = DistanceFunction::onemax_phase2(n, k, d).map_err(e)?;
    let c = 1.0 / (std::f64::consts::E * n as f64);
    record(
        "onemax_phase2",
        check_bound(
            &om,
            &ladder_states(n, d + 1..=k - 1),
            BoundKind::Multiplicative(c),
            samples,
            81,
        )
        .map_err(e)?,
    );

    let (n, r) = (100, 5);
    let pw = DistanceFunction::lemma1_piecewise(n, r).map_err(e)?;
    record(
        "lemma1_piecewise",
        check_bound(
            &pw,
            &ladder_states(n, 0..=pw.d()),
            BoundKind::Additive(1.0 / (n * n) as f64),
            samples,
            82,
        )
        .map_err(e)?,
    );

    let (n, k, d) = (10, 4, 1);
    let weights = GENERAL_WEIGHTS
        .iter()
        .map(|w| parse_rational(w))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    let del = build_linear(weights, k, d).map_err(e)?;
    let vmin = vmin_check(&del).map_err(e)?;
    let gd = DistanceFunction::general_deletion(del);
    let c = 1.0 / (std::f64::consts::E * (n as f64).powi(2 * d as i32 + 2));
    record(
        "general_deletion",
        check_bound(
            &gd,
            &states_with_ones(n, d + 1..=k).map_err(e)?,
            BoundKind::Multiplicative(c),
            samples,
            83,
        )
        .map_err(e)?,
    );

    let ladder = verify_ladder(100, 5).map_err(e)?;
    ok &= ladder.passed() && vmin.holds;
    parts.push(format!(
        "ladder n=100 r=5: differences {}, ratios {}, final gap {}; V_min {} with δ {} (1/V_min <= 1 + 1/δ: {})",
        ladder.differences_hold,
        ladder.ratios_hold,
        ladder.final_gap_holds,
        vmin.v_min,
        vmin.delta,
        vmin.holds
    ));
    Ok((ok, parts.join("; ")))
}

fn optimum_cross_check(mode: Mode) -> Check {
    let max_n = match mode {
        Mode::Full => 12,
        Mode::Quick => 8,
    };
    let mut cases: Vec<(String, Instance)> = Vec::new();
    let mut push = |label: String, inst: Instance| cases.push((label, inst));
    let mut rng = RandomSource::new(9);
    for n in 1..=max_n {
        for k in 1..=n {
            for d in 0..k {
                push(
                    format!("onemax n={n} k={k} d={d}"),
                    build_onemax(n, k, d).map_err(e)?.into(),
                );
                push(
                    format!("binval n={n} k={k} d={d}"),
                    build_binval(n, k, d).map_err(e)?.into(),
                );
            }
            if 2 * k >= n {
                push(
                    format!("thm10_highk n={n} k={k}"),
                    build_thm10_highk(n, k).map_err(e)?.into(),
                );
            }
            if k >= 2 && 2 * k < n {
                for m in [2, 3] {
                    push(
                        format!("thm10_midk n={n} k={k} m={m}"),
                        build_thm10_midk(n, k, m).map_err(e)?.into(),
                    );
                }
            }
        }
        for d in 0..n {
            push(
                format!("thm8 n={n} d={d}"),
                build_thm8_plateau(n, d).map_err(e)?.into(),
            );
        }
        for m in [1, 2, 3] {
            push(
                format!("thm10_k1 n={n} m={m}"),
                build_thm10_k1(n, m).map_err(e)?.into(),
            );
        }
        let k = rng.gen_range(1..=n);
        let d = rng.gen_range(0..k);
        push(
            format!("linear n={n} k={k} d={d}"),
            build_linear(random_weights(n, &mut rng), k, d)
                .map_err(e)?
                .into(),
        );
    }
    let total = cases.len();
    let mismatches = cases
        .par_iter()
        .map(|(label, inst)| -> Result<Option<String>, String> {
            let found = brute_force_optimum(inst).map_err(e)?;
            let stored = inst
                .optimum_value()
                .ok_or_else(|| format!("{label}: no stored optimum"))?;
            let formula = match inst {
                Instance::Worst(w) if w.family() == Family::Thm10MidK => {
                    let k = w.k() as i64;
                    Some(FitnessValue::new(BigRational::new(
                        BigInt::from(2 * k * k + 1),
                        BigInt::from(2),
                    )))
                }
                Instance::Worst(w) if w.family() == Family::Thm10HighK => {
                    Some(FitnessValue::from_integer((w.n() + w.k() - 1) as i64))
                }
                _ => None,
            };
            let formula_ok = formula.is_none_or(|f| f == found);
            Ok((found != *stored || !formula_ok)
                .then(|| format!("{label}: brute {found} vs stored {stored}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let bad: Vec<String> = mismatches.into_iter().flatten().collect();
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{total} instances with n <= {max_n} across all builder families agree")
        } else {
            format!("{} of {total} disagree, e.g. {}", bad.len(), bad[0])
        },
    ))
}

fn determinism(mode: Mode) -> Check {
    let trials = match mode {
        Mode::Full => 60,
        Mode::Quick => 20,
    };
    let text = format!(
        "family = \"onemax\"\nn = [16, 32, 64]\nd = [1, 3]\nk = \"d + 5\"\ntrials = {trials}\nmaster_seed = 1234\n"
    );
    let spec = SweepSpec::from_toml(&text).map_err(e)?;
    let one = to_csv(&sweep(&spec, Some(1)).map_err(e)?.rows);
    let eight = to_csv(&sweep(&spec, Some(8)).map_err(e)?.rows);
    Ok((
        one == eight,
        format!(
            "{} CSV bytes over {} cells, identical at 1 and 8 workers: {}",
            one.len(),
            one.lines().count() - 1,
            one == eight
        ),
    ))
}
