//! Distance functions from the runtime proofs and Monte Carlo checks of
//! their drift.
//!
//! Each [`DistanceFunction`] fixes the process it is measured under: the
//! two accept-all walk distances step the walk that accepts every
//! offspring, all others step the (1+1)-EA on the instance they carry.
//! Drift is estimated at explicitly supplied states rather than along
//! trajectories, so rare states get the same number of samples as common
//! ones. States at distance zero are absorbed: their drift is 0 and no
//! step is taken.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::bitvec::{derive_seed, mutate_into, BitString, RandomSource};
use crate::problems::{
    build_binval, build_onemax, DeletionRobustInstance, FitnessValue, Instance, ProblemError,
};

/// Largest `n` for which `V_min` of a general deletion distance is found by
/// enumeration.
pub const MAX_VMIN_ENUMERATION_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriftError {
    #[error("invalid distance parameters: {0}")]
    InvalidParameters(String),
    #[error("state outside the distance domain: {0}")]
    Domain(String),
    #[error("state has length {got}, distance expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("at least one {0} is required")]
    Empty(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn ratio(p: usize, q: usize) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

#[derive(Debug, Clone)]
pub enum DistanceFunction {
    /// Accept-all walk with `d = n/2 + r`: a linear ramp below `n/2`, a
    /// geometric ladder from `n/2` to `d`, and 0 beyond `d`.
    Lemma1Piecewise { n: usize, r: usize },
    /// Accept-all walk: `d + 1 - |x|` while `|x| <= d`.
    Lemma1Linear { n: usize, d: usize },
    /// `k - |x|` on deletion-robust OneMax, for `d < |x| <= k`.
    OnemaxPhase2 { inst: Instance },
    /// Zeros before the `(d+1)`-th 1-bit on deletion-robust BinVal, for
    /// feasible `x` with more than `d` ones.
    BinvalPhase2a { inst: Instance },
    /// `k` minus the number of leading ones on deletion-robust BinVal, for
    /// feasible `x` whose first `d+1` bits are set.
    BinvalPhase2b { inst: Instance },
    /// Optimum minus `F(x)` for feasible `x` on any deletion-robust instance.
    GeneralDeletion { inst: Instance },
}

impl DistanceFunction {
    pub fn lemma1_piecewise(n: usize, r: usize) -> Result<Self, DriftError> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(DriftError::InvalidParameters(format!(
                "n must be even and >= 2, got {n}"
            )));
        }
        if r < 1 || n / 2 + r >= n {
            return Err(DriftError::InvalidParameters(format!(
                "requires 1 <= r and d = n/2 + r < n, got n={n} r={r}"
            )));
        }
        Ok(DistanceFunction::Lemma1Piecewise { n, r })
    }

    pub fn lemma1_linear(n: usize, d: usize) -> Result<Self, DriftError> {
        if d >= n {
            return Err(DriftError::InvalidParameters(format!(
                "requires d < n, got n={n} d={d}"
            )));
        }
        Ok(DistanceFunction::Lemma1Linear { n, d })
    }

    pub fn onemax_phase2(n: usize, k: usize, d: usize) -> Result<Self, DriftError> {
        Ok(DistanceFunction::OnemaxPhase2 {
            inst: build_onemax(n, k, d)?.into(),
        })
    }

    pub fn binval_phase2a(n: usize, k: usize, d: usize) -> Result<Self, DriftError> {
        Ok(DistanceFunction::BinvalPhase2a {
            inst: build_binval(n, k, d)?.into(),
        })
    }

    pub fn binval_phase2b(n: usize, k: usize, d: usize) -> Result<Self, DriftError> {
        Ok(DistanceFunction::BinvalPhase2b {
            inst: build_binval(n, k, d)?.into(),
        })
    }

    pub fn general_deletion(inst: DeletionRobustInstance) -> Self {
        DistanceFunction::GeneralDeletion { inst: inst.into() }
    }

    pub const NAMES: [&'static str; 6] = [
        "lemma1_piecewise",
        "lemma1_linear",
        "onemax_phase2",
        "binval_phase2a",
        "binval_phase2b",
        "general_deletion",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DistanceFunction::Lemma1Piecewise { .. } => "lemma1_piecewise",
            DistanceFunction::Lemma1Linear { .. } => "lemma1_linear",
            DistanceFunction::OnemaxPhase2 { .. } => "onemax_phase2",
            DistanceFunction::BinvalPhase2a { .. } => "binval_phase2a",
            DistanceFunction::BinvalPhase2b { .. } => "binval_phase2b",
            DistanceFunction::GeneralDeletion { .. } => "general_deletion",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DistanceFunction::Lemma1Piecewise { n, .. }
            | DistanceFunction::Lemma1Linear { n, .. } => *n,
            DistanceFunction::OnemaxPhase2 { inst }
            | DistanceFunction::BinvalPhase2a { inst }
            | DistanceFunction::BinvalPhase2b { inst }
            | DistanceFunction::GeneralDeletion { inst } => inst.n(),
        }
    }

    /// The deletion budget `d` of the underlying process.
    pub fn d(&self) -> usize {
        match self {
            DistanceFunction::Lemma1Piecewise { n, r } => n / 2 + r,
            DistanceFunction::Lemma1Linear { d, .. } => *d,
            DistanceFunction::OnemaxPhase2 { inst }
            | DistanceFunction::BinvalPhase2a { inst }
            | DistanceFunction::BinvalPhase2b { inst }
            | DistanceFunction::GeneralDeletion { inst } => inst.d().expect("deletion instance"),
        }
    }

    /// The instance whose (1+1)-EA step the distance is measured under;
    /// `None` for the accept-all walk.
    pub fn instance(&self) -> Option<&Instance> {
        match self {
            DistanceFunction::Lemma1Piecewise { .. } | DistanceFunction::Lemma1Linear { .. } => {
                None
            }
            DistanceFunction::OnemaxPhase2 { inst }
            | DistanceFunction::BinvalPhase2a { inst }
            | DistanceFunction::BinvalPhase2b { inst }
            | DistanceFunction::GeneralDeletion { inst } => Some(inst),
        }
    }

    /// Whether both `V` and the step's acceptance depend on `x` only
    /// through its number of ones.
    fn ones_only(&self) -> bool {
        matches!(
            self,
            DistanceFunction::Lemma1Piecewise { .. }
                | DistanceFunction::Lemma1Linear { .. }
                | DistanceFunction::OnemaxPhase2 { .. }
        )
    }

    /// Whether `x` lies in the domain the distance is defined on.
    pub fn in_domain(&self, x: &BitString) -> bool {
        eval_distance(self, x).is_ok()
    }

    /// Smallest positive value `V` takes on its domain.
    pub fn v_min(&self) -> Result<BigRational, DriftError> {
        match self {
            DistanceFunction::Lemma1Piecewise { n, r } => Ok(piecewise_v(*n, *r, n / 2 + r)),
            DistanceFunction::GeneralDeletion { inst } => {
                let Instance::Deletion(del) = inst else {
                    unreachable!("general deletion distances wrap deletion instances")
                };
                if del.n() <= MAX_VMIN_ENUMERATION_N {
                    Ok(vmin_check(del)?.v_min)
                } else {
                    // 1/V_min <= 1/w_n + 1/δ
                    let w_n = del
                        .objective()
                        .weights()
                        .last()
                        .expect("n >= 1")
                        .value()
                        .clone();
                    let delta = del.objective().delta();
                    Ok(&w_n * &delta / (&w_n + &delta))
                }
            }
            _ => Ok(BigRational::one()),
        }
    }
}

fn check_len(dist: &DistanceFunction, x: &BitString) -> Result<(), DriftError> {
    if x.len() != dist.n() {
        return Err(DriftError::LengthMismatch {
            expected: dist.n(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `1 + 20r/n`, the ladder's growth factor.
fn piecewise_growth(n: usize, r: usize) -> BigRational {
    BigRational::one() + ratio(20 * r, n)
}

/// `C = (1 + 20r)(1 + 20r/n)^r`, the value at `j = n/2`.
fn piecewise_c(n: usize, r: usize) -> BigRational {
    rat(1 + 20 * r as i64) * num_traits::pow(piecewise_growth(n, r), r)
}

/// `V_j` of the accept-all walk distance with `d = n/2 + r`.
fn piecewise_v(n: usize, r: usize, j: usize) -> BigRational {
    let half = n / 2;
    let d = half + r;
    if j > d {
        return BigRational::zero();
    }
    let c = piecewise_c(n, r);
    if j < half {
        c + rat((half - j) as i64) * ratio(20 * r, n + 20 * r)
    } else {
        c - num_traits::pow(piecewise_growth(n, r), j - half) + BigRational::one()
    }
}

/// `D_j`, the ladder step, for `1 <= j <= d + 1`.
fn piecewise_step(n: usize, r: usize, j: usize) -> BigRational {
    let half = n / 2;
    if j <= half {
        ratio(20 * r, n + 20 * r)
    } else {
        num_traits::pow(piecewise_growth(n, r), j - 1 - half) * ratio(20 * r, n)
    }
}

/// Number of leading 1-bits.
fn leading_ones(x: &BitString) -> usize {
    (0..x.len()).take_while(|&i| x.get(i)).count()
}

/// The distance `V(x)`, exactly.
pub fn eval_distance(dist: &DistanceFunction, x: &BitString) -> Result<BigRational, DriftError> {
    check_len(dist, x)?;
    let ones = x.ones();
    match dist {
        DistanceFunction::Lemma1Piecewise { n, r } => Ok(piecewise_v(*n, *r, ones)),
        DistanceFunction::Lemma1Linear { d, .. } => Ok(rat((d + 1).saturating_sub(ones) as i64)),
        DistanceFunction::OnemaxPhase2 { inst } => {
            let (k, d) = (inst.k(), dist.d());
            if !(d < ones && ones <= k) {
                return Err(DriftError::Domain(format!(
                    "requires {d} < |x| <= {k}, got {ones}"
                )));
            }
            Ok(rat((k - ones) as i64))
        }
        DistanceFunction::BinvalPhase2a { inst } => {
            let (k, d) = (inst.k(), dist.d());
            if !(d < ones && ones <= k) {
                return Err(DriftError::Domain(format!(
                    "requires {d} < |x| <= {k}, got {ones}"
                )));
            }
            let pos = x.iter_ones().nth(d).expect("more than d ones");
            Ok(rat((pos - d) as i64))
        }
        DistanceFunction::BinvalPhase2b { inst } => {
            let (k, d) = (inst.k(), dist.d());
            let lead = leading_ones(x);
            if ones > k || lead <= d {
                return Err(DriftError::Domain(format!(
                    "requires |x| <= {k} and the first {} bits set, got |x|={ones} with {lead} leading ones",
                    d + 1
                )));
            }
            Ok(rat((k - lead) as i64))
        }
        DistanceFunction::GeneralDeletion { inst } => {
            if ones > inst.k() {
                return Err(DriftError::Domain(format!(
                    "requires a feasible x (|x| <= {}), got {ones}",
                    inst.k()
                )));
            }
            let opt = inst
                .optimum_value()
                .expect("deletion instances know their optimum");
            Ok(opt.value() - inst.eval_f(x)?.into_inner())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// One step of the process `dist` is measured under, written to `next`.
struct Stepper<'a> {
    dist: &'a DistanceFunction,
    x: &'a BitString,
    fx: Option<FitnessValue>,
}

impl<'a> Stepper<'a> {
    fn new(dist: &'a DistanceFunction, x: &'a BitString) -> Result<Self, DriftError> {
        let fx = match dist.instance() {
            Some(inst) => Some(inst.fitness(x)?),
            None => None,
        };
        Ok(Stepper { dist, x, fx })
    }

    /// Whether the offspring `y` replaces the parent.
    fn accepts(&self, y: &BitString) -> Result<bool, DriftError> {
        match (self.dist.instance(), &self.fx) {
            (Some(inst), Some(fx)) => Ok(inst.fitness(y)? >= *fx),
            _ => Ok(true),
        }
    }
}

/// Monte Carlo estimate of `E[V(x) - V(x')]`, where `x'` is the successor
/// of `x` after one step: the (1+1)-EA step for distances that carry an
/// instance, the accept-all step otherwise.
pub fn estimate_drift(
    dist: &DistanceFunction,
    x: &BitString,
    samples: u64,
    rng: &mut RandomSource,
) -> Result<DriftEstimate, DriftError> {
    if samples == 0 {
        return Err(DriftError::Empty("sample"));
    }
    let v0 = eval_distance(dist, x)?;
    if v0.is_zero() {
        return Ok(DriftEstimate {
            mean: 0.0,
            stderr: 0.0,
            samples,
        });
    }
    let stepper = Stepper::new(dist, x)?;
    // decrease V(x) - V(x') per distinct successor
    let mut memo: HashMap<u64, f64> = HashMap::new();
    let key = |y: &BitString| -> Option<u64> {
        if dist.ones_only() {
            Some(y.ones() as u64)
        } else if y.len() <= 64 {
            Some(y.to_index())
        } else {
            None
        }
    };
    let decrease = |y: &BitString| -> Result<f64, DriftError> {
        if !stepper.accepts(y)? {
            return Ok(0.0);
        }
        let v = eval_distance(dist, y)?;
        Ok((&v0 - v).to_f64().unwrap_or(f64::NAN))
    };

    let mut y = x.clone();
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..samples {
        mutate_into(stepper.x, &mut y, rng);
        let delta = if y == *x {
            0.0
        } else {
            match key(&y) {
                Some(kk) => match memo.get(&kk) {
                    Some(&v) => v,
                    None => {
                        let v = decrease(&y)?;
                        memo.insert(kk, v);
                        v
                    }
                },
                None => decrease(&y)?,
            }
        };
        // Welford update
        let count = (i + 1) as f64;
        let diff = delta - mean;
        mean += diff / count;
        m2 += diff * (delta - mean);
    }
    let stderr = if samples > 1 {
        (m2 / (samples - 1) as f64 / samples as f64).sqrt()
    } else {
        0.0
    };
    Ok(DriftEstimate {
        mean,
        stderr,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    /// Drift at least `c` in every non-target state.
    Additive(f64),
    /// Drift at least `c * V(x)` in every non-target state.
    Multiplicative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDrift {
    pub state: BitString,
    pub distance: f64,
    pub absorbed: bool,
    pub estimate: DriftEstimate,
    /// Required drift: `c` or `c * V(x)`.
    pub required: f64,
    /// Estimated drift minus the required drift.
    pub margin: f64,
    /// Margin below `-3` standard errors.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub family: &'static str,
    pub kind: BoundKind,
    pub states: Vec<StateDrift>,
    /// `max V / c` (additive) or `(1 + ln(max V / V_min)) / c`
    /// (multiplicative), over the supplied states.
    pub implied_bound: f64,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.states.iter().all(|s| !s.flagged)
    }

    pub fn flagged(&self) -> usize {
        self.states.iter().filter(|s| s.flagged).count()
    }

    /// Smallest margin in units of its standard error, over states with a
    /// positive distance.
    pub fn worst_z(&self) -> Option<f64> {
        self.states
            .iter()
            .filter(|s| !s.absorbed)
            .map(|s| {
                if s.estimate.stderr > 0.0 {
                    s.margin / s.estimate.stderr
                } else if s.margin >= 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            })
            .min_by(f64::total_cmp)
    }

    pub const CSV_HEADER: &'static str =
        "family,state,ones,distance,drift,stderr,required,margin,flagged";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.states {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.family,
                s.state,
                s.state.ones(),
                s.distance,
                s.estimate.mean,
                s.estimate.stderr,
                s.required,
                s.margin,
                s.flagged
            );
        }
        out
    }
}

/// Estimates the drift at every state with `samples` steps each and
/// compares it against the bound. State `i` draws from the stream
/// `derive_seed(seed, 0, i)`, so the report does not depend on how the
/// states are scheduled.
pub fn check_bound(
    dist: &DistanceFunction,
    states: &[BitString],
    kind: BoundKind,
    samples: u64,
    seed: u64,
) -> Result<DriftReport, DriftError> {
    if states.is_empty() {
        return Err(DriftError::Empty("state"));
    }
    let rows = states
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<StateDrift, DriftError> {
            let v = eval_distance(dist, x)?;
            let distance = v.to_f64().unwrap_or(f64::INFINITY);
            let mut rng = RandomSource::new(derive_seed(seed, 0, i as u64));
            let estimate = estimate_drift(dist, x, samples, &mut rng)?;
            let absorbed = v.is_zero();
            let required = match kind {
                BoundKind::Additive(c) => c,
                BoundKind::Multiplicative(c) => c * distance,
            };
            let margin = estimate.mean - required;
            Ok(StateDrift {
                state: x.clone(),
                distance,
                absorbed,
                estimate,
                required,
                margin,
                flagged: !absorbed && margin < -3.0 * estimate.stderr,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let v_max = rows.iter().map(|r| r.distance).fold(0.0, f64::max);
    let implied_bound = match kind {
        BoundKind::Additive(c) => v_max / c,
        BoundKind::Multiplicative(c) => {
            let v_min = dist.v_min()?.to_f64().unwrap_or(f64::MIN_POSITIVE);
            (1.0 + (v_max / v_min).ln().max(0.0)) / c
        }
    };
    Ok(DriftReport {
        family: dist.name(),
        kind,
        states: rows,
        implied_bound,
    })
}

/// Every string of length `n` whose one-count lies in `ones`.
pub fn states_with_ones(
    n: usize,
    ones: std::ops::RangeInclusive<usize>,
) -> Result<Vec<BitString>, DriftError> {
    if n > 24 {
        return Err(DriftError::InvalidParameters(format!(
            "exhaustive state lists are limited to n <= 24, got {n}"
        )));
    }
    Ok((0..1u64 << n)
        .filter(|c| ones.contains(&(c.count_ones() as usize)))
        .map(|c| BitString::from_index(n, c).expect("n >= 1"))
        .collect())
}

/// One representative per one-count in `ones`: the string `1^j 0^(n-j)`.
pub fn ladder_states(n: usize, ones: std::ops::RangeInclusive<usize>) -> Vec<BitString> {
    ones.filter(|&j| j <= n)
        .map(|j| BitString::leading_ones(n, j).expect("j <= n"))
        .collect()
}

/// Exact checks of the accept-all walk distance's ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub n: usize,
    pub r: usize,
    pub d: usize,
    /// `D_j = V_{j-1} - V_j` for `1 <= j <= d`.
    pub differences_hold: bool,
    /// `D_{j+1}/D_j` is 1 below `n/2` and `1 + 20r/n` from `n/2` to `d`.
    pub ratios_hold: bool,
    /// `V_d - V_{d+1} >= n D_j` for `1 <= j <= d + 1`.
    pub final_gap_holds: bool,
    /// `V_j > 0` for `j <= d` and `V_j = 0` beyond.
    pub positivity_holds: bool,
}

impl LadderReport {
    pub fn passed(&self) -> bool {
        self.differences_hold && self.ratios_hold && self.final_gap_holds && self.positivity_holds
    }
}

pub fn verify_ladder(n: usize, r: usize) -> Result<LadderReport, DriftError> {
    DistanceFunction::lemma1_piecewise(n, r)?;
    let d = n / 2 + r;
    let v: Vec<BigRational> = (0..=n).map(|j| piecewise_v(n, r, j)).collect();
    let step: Vec<BigRational> = (0..=d + 1)
        .map(|j| {
            if j == 0 {
                BigRational::zero()
            } else {
                piecewise_step(n, r, j)
            }
        })
        .collect();
    let differences_hold = (1..=d).all(|j| &v[j - 1] - &v[j] == step[j]);
    let growth = piecewise_growth(n, r);
    let ratios_hold = (1..=d).all(|j| {
        let expected = if j < n / 2 {
            BigRational::one()
        } else {
            growth.clone()
        };
        &step[j + 1] / &step[j] == expected
    });
    let gap = &v[d] - &v[d + 1];
    let n_rat = rat(n as i64);
    let final_gap_holds = (1..=d + 1).all(|j| gap >= &n_rat * &step[j]);
    let positivity_holds = v
        .iter()
        .enumerate()
        .all(|(j, vj)| (j <= d) == vj.is_positive());
    Ok(LadderReport {
        n,
        r,
        d,
        differences_hold,
        ratios_hold,
        final_gap_holds,
        positivity_holds,
    })
}

/// Smallest positive distance to the optimum of a deletion-robust instance,
/// found by enumerating every feasible string, against `1/V_min <= 1 + 1/δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VminCheck {
    pub v_min: BigRational,
    pub delta: BigRational,
    pub min_weight: BigRational,
    /// `1/V_min <= 1/w_n + 1/δ`.
    pub sharp_holds: bool,
    /// `1/V_min <= 1 + 1/δ`.
    pub holds: bool,
}

pub fn vmin_check(inst: &DeletionRobustInstance) -> Result<VminCheck, DriftError> {
    let n = inst.n();
    if n > MAX_VMIN_ENUMERATION_N {
        return Err(DriftError::InvalidParameters(format!(
            "V_min enumeration is limited to n <= {MAX_VMIN_ENUMERATION_N}, got {n}"
        )));
    }
    let opt = inst.optimum_value().value();
    let mut v_min: Option<BigRational> = None;
    for code in 0..1u64 << n {
        if code.count_ones() as usize > inst.k() {
            continue;
        }
        let x = BitString::from_index(n, code).expect("n >= 1");
        let v = opt - inst.eval_f(&x)?.into_inner();
        if v.is_positive() && v_min.as_ref().is_none_or(|m| v < *m) {
            v_min = Some(v);
        }
    }
    // every instance has a feasible non-optimal string (the empty one)
    let v_min = v_min.expect("the empty string is not optimal");
    let delta = inst.objective().delta();
    let min_weight = inst
        .objective()
        .weights()
        .last()
        .expect("n >= 1")
        .value()
        .clone();
    let inv = v_min.recip();
    Ok(VminCheck {
        sharp_holds: inv <= min_weight.recip() + delta.recip(),
        holds: inv <= BigRational::one() + delta.recip(),
        v_min,
        delta,
        min_weight,
    })
}

/// Outcome of watching a distance along (1+1)-EA trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityCheck {
    /// Accepted offspring that differ from their parent.
    pub accepted: u64,
    /// Accepted steps after which the distance was larger.
    pub increases: u64,
}

/// Runs the (1+1)-EA from the given start states in turn, restarting from
/// the next one whenever the distance reaches 0, until `accepted` moves
/// have been observed; counts moves that increased the distance.
pub fn count_increases(
    dist: &DistanceFunction,
    starts: &[BitString],
    accepted: u64,
    seed: u64,
) -> Result<MonotonicityCheck, DriftError> {
    let inst = dist.instance().ok_or_else(|| {
        DriftError::InvalidParameters(format!(
            "{} is not measured under the (1+1)-EA",
            dist.name()
        ))
    })?;
    if starts.is_empty() {
        return Err(DriftError::Empty("start state"));
    }
    let mut rng = RandomSource::new(seed);
    let mut seen = 0u64;
    let mut increases = 0u64;
    let mut next_start = 0usize;
    let mut x = starts[0].clone();
    let mut v = eval_distance(dist, &x)?;
    let mut fx = inst.fitness(&x)?;
    let mut y = x.clone();
    let mut idle = 0u64;
    while seen < accepted {
        if v.is_zero() || idle > 1_000_000 {
            next_start = (next_start + 1) % starts.len();
            x = starts[next_start].clone();
            v = eval_distance(dist, &x)?;
            fx = inst.fitness(&x)?;
            idle = 0;
            continue;
        }
        mutate_into(&x, &mut y, &mut rng);
        let fy = inst.fitness(&y)?;
        if fy < fx || y == x {
            idle += 1;
            continue;
        }
        idle = 0;
        let vy = eval_distance(dist, &y)?;
        seen += 1;
        if vy > v {
            increases += 1;
        }
        std::mem::swap(&mut x, &mut y);
        v = vy;
        fx = fy;
    }
    Ok(MonotonicityCheck {
        accepted: seen,
        increases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mutation_delta_pmf;
    use crate::problems::{build_linear, build_thm8_plateau, parse_rational};
    use rand::Rng;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn ones(n: usize, j: usize) -> BitString {
        BitString::leading_ones(n, j).unwrap()
    }

    /// Exact one-step drift of a distance that depends only on the
    /// one-count, from the law of the one-count change.
    fn exact_lumped_drift(dist: &DistanceFunction, j: usize) -> f64 {
        let n = dist.n();
        let v = |i: usize| eval_distance(dist, &ones(n, i)).map(|v| v.to_f64().unwrap());
        let v0 = v(j).unwrap();
        let fitness = |i: usize| {
            dist.instance()
                .map(|inst| inst.fitness(&ones(n, i)).unwrap())
        };
        let pmf = mutation_delta_pmf(n, j);
        let mut drift = 0.0;
        for (idx, p) in pmf.iter().enumerate() {
            let i = idx; // one-count after mutation
            if i == j || *p == 0.0 {
                continue;
            }
            let accepted = match (fitness(i), fitness(j)) {
                (Some(fi), Some(fj)) => fi >= fj,
                _ => true,
            };
            if accepted {
                drift += p * (v0 - v(i).unwrap());
            }
        }
        drift
    }

    #[test]
    fn piecewise_values_at_the_boundary() {
        let dist = DistanceFunction::lemma1_piecewise(100, 5).unwrap();
        // C = 101 * 2^5
        assert_eq!(eval_distance(&dist, &ones(100, 50)).unwrap(), rat(3232));
        assert_eq!(
            eval_distance(&dist, &ones(100, 49)).unwrap(),
            rat(3232) + q("1/2")
        );
        // V_d = 20r(1 + 20r/n)^r + 1
        assert_eq!(eval_distance(&dist, &ones(100, 55)).unwrap(), rat(3201));
        for j in 56..=100 {
            assert!(eval_distance(&dist, &ones(100, j)).unwrap().is_zero());
        }
        assert_eq!(dist.v_min().unwrap(), rat(3201));
    }

    #[test]
    fn ladder_identities_hold_exactly() {
        for (n, r) in [(100, 5), (20, 3), (64, 1), (200, 40), (10, 4)] {
            let rep = verify_ladder(n, r).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
        assert!(verify_ladder(11, 2).is_err());
        assert!(verify_ladder(10, 5).is_err());
        assert!(verify_ladder(10, 0).is_err());
    }

    #[test]
    fn zero_exactly_on_target_sets() {
        let n = 10;
        let del = build_linear(
            ["3", "5/2", "5/2", "2", "7/4", "3/2", "1", "1", "6/5", "1"]
                .map(q)
                .to_vec(),
            4,
            1,
        )
        .unwrap();
        let dists = vec![
            DistanceFunction::lemma1_piecewise(n, 2).unwrap(),
            DistanceFunction::lemma1_linear(n, 3).unwrap(),
            DistanceFunction::onemax_phase2(n, 6, 2).unwrap(),
            DistanceFunction::binval_phase2a(n, 6, 2).unwrap(),
            DistanceFunction::binval_phase2b(n, 6, 2).unwrap(),
            DistanceFunction::general_deletion(del),
        ];
        for dist in &dists {
            let mut in_domain = 0;
            for code in 0..1u64 << n {
                let x = BitString::from_index(n, code).unwrap();
                let Ok(v) = eval_distance(dist, &x) else {
                    continue;
                };
                in_domain += 1;
                assert!(!v.is_negative(), "{} {x}", dist.name());
                let target = match dist {
                    DistanceFunction::Lemma1Piecewise { .. }
                    | DistanceFunction::Lemma1Linear { .. } => x.ones() > dist.d(),
                    DistanceFunction::OnemaxPhase2 { inst } => x.ones() == inst.k(),
                    DistanceFunction::BinvalPhase2a { .. } => leading_ones(&x) > dist.d(),
                    DistanceFunction::BinvalPhase2b { inst } => leading_ones(&x) >= inst.k(),
                    DistanceFunction::GeneralDeletion { inst } => inst.is_optimal(&x).unwrap(),
                };
                assert_eq!(v.is_zero(), target, "{} {x}", dist.name());
            }
            assert!(in_domain > 0, "{}", dist.name());
        }
    }

    #[test]
    fn domain_errors_are_explicit() {
        let om = DistanceFunction::onemax_phase2(10, 6, 2).unwrap();
        assert!(matches!(
            eval_distance(&om, &ones(10, 2)),
            Err(DriftError::Domain(_))
        ));
        assert!(matches!(
            eval_distance(&om, &ones(10, 7)),
            Err(DriftError::Domain(_))
        ));
        assert_eq!(eval_distance(&om, &ones(10, 6)).unwrap(), rat(0));
        assert!(matches!(
            eval_distance(&om, &ones(9, 4)),
            Err(DriftError::LengthMismatch {
                expected: 10,
                got: 9
            })
        ));
        let a = DistanceFunction::binval_phase2a(10, 6, 2).unwrap();
        assert!(matches!(
            eval_distance(&a, &"1100000000".parse().unwrap()),
            Err(DriftError::Domain(_))
        ));
        assert_eq!(
            eval_distance(&a, &"0101010000".parse().unwrap()).unwrap(),
            rat(3)
        );
        let b = DistanceFunction::binval_phase2b(10, 6, 2).unwrap();
        assert!(matches!(
            eval_distance(&b, &"1101000000".parse().unwrap()),
            Err(DriftError::Domain(_))
        ));
        assert_eq!(
            eval_distance(&b, &"1110100000".parse().unwrap()).unwrap(),
            rat(3)
        );
        assert!(DistanceFunction::onemax_phase2(10, 2, 2).is_err());
        assert!(DistanceFunction::lemma1_linear(4, 4).is_err());
    }

    #[test]
    fn plateau_points_are_one_below_optimum() {
        let del = build_thm8_plateau(10, 4).unwrap();
        let dist = DistanceFunction::general_deletion(del.clone());
        let mut plateau = 0;
        for x in states_with_ones(10, del.k()..=del.k()).unwrap() {
            if del.eval_f(&x).unwrap() == FitnessValue::from_integer(1) {
                plateau += 1;
                assert_eq!(eval_distance(&dist, &x).unwrap(), rat(1));
            }
        }
        assert!(plateau > 0);
    }

    #[test]
    fn absorbed_states_have_zero_drift() {
        let dist = DistanceFunction::onemax_phase2(20, 10, 3).unwrap();
        let mut rng = RandomSource::new(1);
        let est = estimate_drift(&dist, &ones(20, 10), 100, &mut rng).unwrap();
        assert_eq!(
            est,
            DriftEstimate {
                mean: 0.0,
                stderr: 0.0,
                samples: 100
            }
        );
        assert!(estimate_drift(&dist, &ones(20, 5), 0, &mut rng).is_err());
    }

    #[test]
    fn estimates_match_exact_lumped_drift() {
        let cases = [
            (
                DistanceFunction::lemma1_piecewise(40, 4).unwrap(),
                vec![0usize, 10, 19, 20, 21, 24],
            ),
            (
                DistanceFunction::lemma1_linear(30, 12).unwrap(),
                vec![0, 5, 12],
            ),
            (
                DistanceFunction::onemax_phase2(30, 20, 5).unwrap(),
                vec![6, 12, 19],
            ),
        ];
        for (dist, js) in &cases {
            for (s, &j) in js.iter().enumerate() {
                let exact = exact_lumped_drift(dist, j);
                let mut rng = RandomSource::new(derive_seed(5, 0, s as u64));
                let est = estimate_drift(dist, &ones(dist.n(), j), 200_000, &mut rng).unwrap();
                assert!(
                    (est.mean - exact).abs() < 4.0 * est.stderr + 1e-12,
                    "{} j={j}: {} vs {exact} (se {})",
                    dist.name(),
                    est.mean,
                    est.stderr
                );
            }
        }
    }

    #[test]
    fn piecewise_exact_drift_exceeds_one_over_n_squared() {
        let dist = DistanceFunction::lemma1_piecewise(100, 5).unwrap();
        for j in 0..=dist.d() {
            let drift = exact_lumped_drift(&dist, j);
            assert!(drift >= 1e-4, "j={j}: {drift}");
        }
    }

    #[test]
    fn onemax_bound_passes() {
        let (n, k, d) = (30, 20, 5);
        let dist = DistanceFunction::onemax_phase2(n, k, d).unwrap();
        let states = ladder_states(n, d + 1..=k);
        let c = 1.0 / (std::f64::consts::E * n as f64);
        let rep = check_bound(&dist, &states, BoundKind::Multiplicative(c), 20_000, 3).unwrap();
        assert!(rep.passed(), "{:?}", rep.worst_z());
        assert!(rep.states.last().unwrap().absorbed);
        // (1 + ln(14)) e n
        let expected = (1.0 + 14f64.ln()) / c;
        assert!((rep.implied_bound - expected).abs() < 1e-9 * expected);
        let csv = rep.to_csv();
        assert!(csv.starts_with(DriftReport::CSV_HEADER));
        assert_eq!(csv.lines().count(), states.len() + 1);
    }

    #[test]
    fn reports_do_not_depend_on_scheduling() {
        let dist = DistanceFunction::lemma1_piecewise(40, 4).unwrap();
        let states = ladder_states(40, 0..=24);
        let kind = BoundKind::Additive(1.0 / 1600.0);
        let a = check_bound(&dist, &states, kind, 2_000, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| check_bound(&dist, &states, kind, 2_000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn unachievable_bound_is_flagged() {
        let dist = DistanceFunction::lemma1_linear(20, 8).unwrap();
        let states = ladder_states(20, 0..=8);
        let rep = check_bound(&dist, &states, BoundKind::Additive(5.0), 2_000, 1).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.flagged(), states.len());
        assert!(check_bound(&dist, &[], BoundKind::Additive(1.0), 10, 1).is_err());
    }

    #[test]
    fn general_deletion_vmin_bound() {
        let mut rng = RandomSource::new(11);
        for trial in 0..25 {
            let n = rng.gen_range(2..=10usize);
            let w: Vec<BigRational> = (0..n)
                .map(|_| {
                    let den: i64 = rng.gen_range(1..=6);
                    BigRational::new((den + rng.gen_range(0..=3 * den)).into(), den.into())
                })
                .collect();
            let k = rng.gen_range(1..=n);
            let d = rng.gen_range(0..k);
            let del = build_linear(w, k, d).unwrap();
            let check = vmin_check(&del).unwrap();
            assert!(check.holds && check.sharp_holds, "trial {trial}: {check:?}");
            let dist = DistanceFunction::general_deletion(del);
            assert_eq!(dist.v_min().unwrap(), check.v_min);
        }
    }

    #[test]
    fn phase_distances_never_increase() {
        let mut rng = RandomSource::new(21);
        let (n, k, d) = (30, 18, 4);
        let om = DistanceFunction::onemax_phase2(n, k, d).unwrap();
        let a = DistanceFunction::binval_phase2a(n, k, d).unwrap();
        let b = DistanceFunction::binval_phase2b(n, k, d).unwrap();
        let mut starts_a = Vec::new();
        let mut starts_b = Vec::new();
        while starts_a.len() < 50 || starts_b.len() < 50 {
            let mut x = BitString::zeros(n).unwrap();
            let m = rng.gen_range(d + 1..=k);
            let mut placed = 0;
            if starts_b.len() < 50 && rng.gen_bool(0.5) {
                for i in 0..=d {
                    x.set(i, true);
                }
                placed = d + 1;
            }
            while placed < m {
                let i = rng.gen_range(0..n);
                if !x.get(i) {
                    x.set(i, true);
                    placed += 1;
                }
            }
            if b.in_domain(&x) && starts_b.len() < 50 {
                starts_b.push(x.clone());
            }
            if starts_a.len() < 50 {
                starts_a.push(x);
            }
        }
        for (dist, starts) in [(&om, &starts_a), (&a, &starts_a), (&b, &starts_b)] {
            let check = count_increases(dist, starts, 200_000, 4).unwrap();
            assert_eq!(check.accepted, 200_000);
            assert_eq!(check.increases, 0, "{}", dist.name());
        }
        let walk = DistanceFunction::lemma1_linear(n, d).unwrap();
        assert!(count_increases(&walk, &starts_a, 10, 1).is_err());
    }
}
