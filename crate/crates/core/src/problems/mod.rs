//! Robust linear problems under a cardinality constraint.
//!
//! Two scenarios are represented exactly:
//!
//! * deletion-robust: an adversary removes up to `d` selected items, and the
//!   objective is the weight that survives. With weights sorted
//!   non-increasingly the adversary always removes the leftmost `d` selected
//!   positions, so evaluation is a single pass over the 1-bits.
//! * worst-case: the objective is the minimum of `m` linear functions.
//!
//! All values are exact rationals. Lower-bound constructions rely on exact
//! plateaus and on the non-integer weight 3/2, so ordering never goes
//! through floating point.

mod file;
mod value;

pub use file::{InstanceFile, RationalText};
pub use value::{format_rational, parse_rational, FitnessValue, Weight};

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitvec::BitString;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("weight {0} is below 1")]
    WeightBelowOne(String),
    #[error("solution length {got} does not match instance length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("optimum value unknown: instance can only be run in censored mode")]
    UnknownOptimum,
    #[error("cannot parse rational {0:?}")]
    BadRational(String),
    #[error("malformed instance file: {0}")]
    Malformed(String),
}

fn invalid(msg: impl Into<String>) -> ProblemError {
    ProblemError::InvalidParameters(msg.into())
}

/// Instance families with a dedicated builder or a general constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "onemax")]
    OneMax,
    #[serde(rename = "binval")]
    BinVal,
    Linear,
    #[serde(rename = "worstcase")]
    WorstCase,
    Thm8,
    #[serde(rename = "thm10_k1")]
    Thm10K1,
    #[serde(rename = "thm10_midk")]
    Thm10MidK,
    #[serde(rename = "thm10_highk")]
    Thm10HighK,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::OneMax,
        Family::BinVal,
        Family::Linear,
        Family::WorstCase,
        Family::Thm8,
        Family::Thm10K1,
        Family::Thm10MidK,
        Family::Thm10HighK,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::OneMax => "onemax",
            Family::BinVal => "binval",
            Family::Linear => "linear",
            Family::WorstCase => "worstcase",
            Family::Thm8 => "thm8",
            Family::Thm10K1 => "thm10_k1",
            Family::Thm10MidK => "thm10_midk",
            Family::Thm10HighK => "thm10_highk",
        }
    }

    pub fn is_deletion(self) -> bool {
        matches!(
            self,
            Family::OneMax | Family::BinVal | Family::Linear | Family::Thm8
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid(format!("unknown family {s:?}")))
    }
}

/// Weights rescaled to a common denominator so that sums run in `i128`.
#[derive(Debug, Clone)]
struct ScaledWeights {
    numerators: Vec<i128>,
    denominator: BigInt,
}

impl ScaledWeights {
    /// `None` if any partial sum could leave the `i128` range.
    fn new(weights: &[Weight]) -> Option<Self> {
        let denominator = weights.iter().fold(BigInt::one(), |acc, w| {
            num_integer::lcm(acc, w.value().denom().clone())
        });
        let mut total = BigInt::zero();
        let mut numerators = Vec::with_capacity(weights.len());
        for w in weights {
            let scaled = w.value().numer() * (&denominator / w.value().denom());
            total += &scaled;
            numerators.push(i128::try_from(&scaled).ok()?);
        }
        i128::try_from(&total).ok()?;
        Some(ScaledWeights {
            numerators,
            denominator,
        })
    }

    fn value(&self, scaled_sum: i128) -> FitnessValue {
        FitnessValue::new(BigRational::new(
            BigInt::from(scaled_sum),
            self.denominator.clone(),
        ))
    }
}

/// Weights of a linear function sorted non-increasingly, together with the
/// permutation back to the order the user supplied them in.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    weights: Vec<Weight>,
    /// `original_order[sorted_index] = user_index`
    original_order: Vec<usize>,
    uniform: Option<BigRational>,
    scaled: Option<ScaledWeights>,
}

impl LinearObjective {
    /// Stable descending sort of user-supplied weights.
    pub fn from_user_weights(user: Vec<Weight>) -> Result<Self, ProblemError> {
        if user.is_empty() {
            return Err(invalid("at least one weight is required"));
        }
        let mut order: Vec<usize> = (0..user.len()).collect();
        order.sort_by(|&a, &b| user[b].cmp(&user[a]));
        let weights = order.iter().map(|&i| user[i].clone()).collect();
        Ok(Self::from_sorted_parts(weights, order))
    }

    fn from_sorted_parts(weights: Vec<Weight>, original_order: Vec<usize>) -> Self {
        debug_assert!(weights.windows(2).all(|p| p[0] >= p[1]));
        let uniform = (weights.first() == weights.last()).then(|| weights[0].value().clone());
        let scaled = ScaledWeights::new(&weights);
        LinearObjective {
            weights,
            original_order,
            uniform,
            scaled,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn original_order(&self) -> &[usize] {
        &self.original_order
    }

    pub fn user_weights(&self) -> Vec<Weight> {
        let mut out = vec![Weight::one(); self.weights.len()];
        for (sorted, &user) in self.original_order.iter().enumerate() {
            out[user] = self.weights[sorted].clone();
        }
        out
    }

    /// Maps a solution over sorted positions to user positions.
    pub fn to_user_order(&self, x: &BitString) -> BitString {
        let mut out = BitString::zeros(x.len()).expect("non-empty");
        for i in x.iter_ones() {
            out.set(self.original_order[i], true);
        }
        out
    }

    pub fn from_user_order(&self, x: &BitString) -> BitString {
        let mut out = BitString::zeros(x.len()).expect("non-empty");
        for (sorted, &user) in self.original_order.iter().enumerate() {
            if x.get(user) {
                out.set(sorted, true);
            }
        }
        out
    }

    /// Smallest gap between two distinct weights; 1 when all weights agree.
    pub fn delta(&self) -> BigRational {
        self.weights
            .windows(2)
            .filter(|p| p[0] != p[1])
            .map(|p| p[0].value() - p[1].value())
            .min()
            .unwrap_or_else(BigRational::one)
    }

    /// Sum of the weights at sorted positions `from..to`.
    pub fn range_sum(&self, from: usize, to: usize) -> BigRational {
        self.weights[from..to]
            .iter()
            .fold(BigRational::zero(), |acc, w| acc + w.value())
    }

    /// Sum of weights over 1-bits, skipping the first `skip` 1-bits.
    fn sum_after_skipping(&self, x: &BitString, skip: usize) -> FitnessValue {
        if x.ones() <= skip {
            return FitnessValue::zero();
        }
        if let Some(w) = &self.uniform {
            return FitnessValue::new(w * BigInt::from(x.ones() - skip));
        }
        if let Some(scaled) = &self.scaled {
            let s: i128 = x.iter_ones().skip(skip).map(|i| scaled.numerators[i]).sum();
            return scaled.value(s);
        }
        FitnessValue::new(
            x.iter_ones()
                .skip(skip)
                .fold(BigRational::zero(), |acc, i| acc + self.weights[i].value()),
        )
    }
}

/// Deletion-robust linear optimization with budget `k` and `d` deletions.
#[derive(Debug, Clone)]
pub struct DeletionRobustInstance {
    family: Family,
    objective: LinearObjective,
    k: usize,
    d: usize,
    optimum: FitnessValue,
}

impl DeletionRobustInstance {
    fn new(
        family: Family,
        objective: LinearObjective,
        k: usize,
        d: usize,
    ) -> Result<Self, ProblemError> {
        let n = objective.len();
        if !(d < k && k <= n) {
            return Err(invalid(format!(
                "deletion-robust instance requires d < k <= n, got n={n} k={k} d={d}"
            )));
        }
        let optimum = FitnessValue::new(objective.range_sum(d, k));
        Ok(DeletionRobustInstance {
            family,
            objective,
            k,
            d,
            optimum,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn objective(&self) -> &LinearObjective {
        &self.objective
    }

    pub fn optimum_value(&self) -> &FitnessValue {
        &self.optimum
    }

    /// Surviving weight after the adversary deletes the leftmost `d`
    /// selected positions.
    pub fn eval_f(&self, x: &BitString) -> Result<FitnessValue, ProblemError> {
        check_len(self.n(), x)?;
        Ok(self.objective.sum_after_skipping(x, self.d))
    }
}

/// Worst case over `m` linear functions; weights carry no order.
#[derive(Debug, Clone)]
pub struct WorstCaseInstance {
    family: Family,
    n: usize,
    objectives: Vec<Vec<Weight>>,
    scaled: Option<Vec<ScaledWeights>>,
    k: usize,
    optimum: Option<FitnessValue>,
}

impl WorstCaseInstance {
    fn new(
        family: Family,
        objectives: Vec<Vec<Weight>>,
        k: usize,
        optimum: Option<FitnessValue>,
    ) -> Result<Self, ProblemError> {
        let m = objectives.len();
        if m == 0 {
            return Err(invalid("worst-case instance requires m >= 1"));
        }
        let n = objectives[0].len();
        if n == 0 {
            return Err(invalid("worst-case instance requires n >= 1"));
        }
        if let Some(bad) = objectives.iter().position(|f| f.len() != n) {
            return Err(invalid(format!(
                "function {} has {} weights, expected {n}",
                bad + 1,
                objectives[bad].len()
            )));
        }
        if k > n {
            return Err(invalid(format!(
                "worst-case instance requires k <= n, got n={n} k={k}"
            )));
        }
        let scaled = objectives
            .iter()
            .map(|f| ScaledWeights::new(f))
            .collect::<Option<Vec<_>>>();
        Ok(WorstCaseInstance {
            family,
            n,
            objectives,
            scaled,
            k,
            optimum,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.objectives.len()
    }

    pub fn objectives(&self) -> &[Vec<Weight>] {
        &self.objectives
    }

    pub fn optimum_value(&self) -> Option<&FitnessValue> {
        self.optimum.as_ref()
    }

    /// Returns a copy with the optimum recorded, e.g. after an exhaustive
    /// search.
    pub fn with_optimum(mut self, optimum: FitnessValue) -> Self {
        self.optimum = Some(optimum);
        self
    }

    /// Value of a single function `f_s`.
    pub fn eval_function(&self, s: usize, x: &BitString) -> Result<FitnessValue, ProblemError> {
        check_len(self.n, x)?;
        if let Some(scaled) = &self.scaled {
            let sc = &scaled[s];
            return Ok(sc.value(x.iter_ones().map(|i| sc.numerators[i]).sum()));
        }
        Ok(FitnessValue::new(
            x.iter_ones().fold(BigRational::zero(), |acc, i| {
                acc + self.objectives[s][i].value()
            }),
        ))
    }

    pub fn eval_f(&self, x: &BitString) -> Result<FitnessValue, ProblemError> {
        check_len(self.n, x)?;
        let mut best: Option<FitnessValue> = None;
        for s in 0..self.m() {
            let v = self.eval_function(s, x)?;
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
        Ok(best.expect("m >= 1"))
    }
}

fn check_len(n: usize, x: &BitString) -> Result<(), ProblemError> {
    if x.len() != n {
        return Err(ProblemError::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

/// A robust optimization problem under the cardinality constraint
/// `|x|_1 <= k`.
#[derive(Debug, Clone)]
pub enum Instance {
    Deletion(DeletionRobustInstance),
    Worst(WorstCaseInstance),
}

impl From<DeletionRobustInstance> for Instance {
    fn from(i: DeletionRobustInstance) -> Self {
        Instance::Deletion(i)
    }
}

impl From<WorstCaseInstance> for Instance {
    fn from(i: WorstCaseInstance) -> Self {
        Instance::Worst(i)
    }
}

impl Instance {
    pub fn family(&self) -> Family {
        match self {
            Instance::Deletion(i) => i.family,
            Instance::Worst(i) => i.family,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Instance::Deletion(i) => i.n(),
            Instance::Worst(i) => i.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Instance::Deletion(i) => i.k,
            Instance::Worst(i) => i.k,
        }
    }

    pub fn d(&self) -> Option<usize> {
        match self {
            Instance::Deletion(i) => Some(i.d),
            Instance::Worst(_) => None,
        }
    }

    pub fn m(&self) -> Option<usize> {
        match self {
            Instance::Deletion(_) => None,
            Instance::Worst(i) => Some(i.m()),
        }
    }

    pub fn optimum_value(&self) -> Option<&FitnessValue> {
        match self {
            Instance::Deletion(i) => Some(&i.optimum),
            Instance::Worst(i) => i.optimum.as_ref(),
        }
    }

    /// The robust objective `F(x)`, ignoring the budget.
    pub fn eval_f(&self, x: &BitString) -> Result<FitnessValue, ProblemError> {
        match self {
            Instance::Deletion(i) => i.eval_f(x),
            Instance::Worst(i) => i.eval_f(x),
        }
    }

    /// Constrained fitness: `k - |x|_1` when the budget is exceeded,
    /// otherwise `F(x)`. Every feasible value is `>= 0` and every infeasible
    /// value is `<= -1`.
    pub fn fitness(&self, x: &BitString) -> Result<FitnessValue, ProblemError> {
        check_len(self.n(), x)?;
        let k = self.k();
        if x.ones() > k {
            return Ok(FitnessValue::from_integer(k as i64 - x.ones() as i64));
        }
        self.eval_f(x)
    }

    /// Whether `x` is feasible and attains the recorded optimum.
    pub fn is_optimal(&self, x: &BitString) -> Result<bool, ProblemError> {
        let optimum = self.optimum_value().ok_or(ProblemError::UnknownOptimum)?;
        check_len(self.n(), x)?;
        if x.ones() > self.k() {
            return Ok(false);
        }
        Ok(self.eval_f(x)? == *optimum)
    }

    /// Whether a fitness value equals the optimum; cheaper than
    /// [`Instance::is_optimal`] when the fitness is already known.
    pub fn is_optimal_fitness(&self, value: &FitnessValue) -> Result<bool, ProblemError> {
        let optimum = self.optimum_value().ok_or(ProblemError::UnknownOptimum)?;
        // infeasible fitness is negative while every optimum is >= 1
        Ok(value == optimum)
    }

    pub fn with_optimum(self, optimum: FitnessValue) -> Self {
        match self {
            Instance::Worst(w) => Instance::Worst(w.with_optimum(optimum)),
            other => other,
        }
    }
}

fn integer_weights(values: impl IntoIterator<Item = BigInt>) -> Result<Vec<Weight>, ProblemError> {
    values
        .into_iter()
        .map(|v| Weight::new(BigRational::from_integer(v)))
        .collect()
}

fn repeat_weight(value: BigRational, count: usize) -> Vec<Weight> {
    vec![Weight::new(value).expect("builder weights are >= 1"); count]
}

fn int(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Deletion-robust OneMax: all weights 1, optimum `k - d`.
pub fn build_onemax(n: usize, k: usize, d: usize) -> Result<DeletionRobustInstance, ProblemError> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let objective = LinearObjective::from_sorted_parts(repeat_weight(int(1), n), (0..n).collect());
    DeletionRobustInstance::new(Family::OneMax, objective, k, d)
}

/// Deletion-robust BinVal: weight of position `i` (1-based) is `2^(n-i)`.
pub fn build_binval(n: usize, k: usize, d: usize) -> Result<DeletionRobustInstance, ProblemError> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let weights = integer_weights((1..=n).map(|i| BigInt::one() << (n - i)))?;
    let objective = LinearObjective::from_sorted_parts(weights, (0..n).collect());
    DeletionRobustInstance::new(Family::BinVal, objective, k, d)
}

/// Plateau construction with `k = d + 1`: the first `k` weights are 2 and
/// the rest 1. Every other string with `k` ones has `F = 1`, the optimum
/// `1^k 0^(n-k)` has `F = 2`.
pub fn build_thm8_plateau(n: usize, d: usize) -> Result<DeletionRobustInstance, ProblemError> {
    if d >= n {
        return Err(invalid(format!(
            "thm8 plateau requires d < n, got n={n} d={d}"
        )));
    }
    let k = d + 1;
    let mut weights = repeat_weight(int(2), k);
    weights.extend(repeat_weight(int(1), n - k));
    let objective = LinearObjective::from_sorted_parts(weights, (0..n).collect());
    DeletionRobustInstance::new(Family::Thm8, objective, k, d)
}

/// General deletion-robust constructor from weights in user order.
pub fn build_linear(
    weights: Vec<BigRational>,
    k: usize,
    d: usize,
) -> Result<DeletionRobustInstance, ProblemError> {
    let weights = weights
        .into_iter()
        .map(Weight::new)
        .collect::<Result<Vec<_>, _>>()?;
    let objective = LinearObjective::from_user_weights(weights)?;
    DeletionRobustInstance::new(Family::Linear, objective, k, d)
}

/// General worst-case constructor; the optimum stays unknown unless given.
pub fn build_worst(
    matrix: Vec<Vec<BigRational>>,
    k: usize,
    optimum: Option<BigRational>,
) -> Result<WorstCaseInstance, ProblemError> {
    let objectives = matrix
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(Weight::new)
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    WorstCaseInstance::new(
        Family::WorstCase,
        objectives,
        k,
        optimum.map(FitnessValue::new),
    )
}

/// `k = 1`, `m` identical functions with `w_1 = 2` and all other weights 1.
pub fn build_thm10_k1(n: usize, m: usize) -> Result<WorstCaseInstance, ProblemError> {
    if n == 0 || m == 0 {
        return Err(invalid(format!(
            "thm10_k1 requires n >= 1 and m >= 1, got n={n} m={m}"
        )));
    }
    let mut f = repeat_weight(int(2), 1);
    f.extend(repeat_weight(int(1), n - 1));
    WorstCaseInstance::new(
        Family::Thm10K1,
        vec![f; m],
        1,
        Some(FitnessValue::from_integer(2)),
    )
}

/// Local-optimum construction for `2 <= k < n/2`, `m >= 2`.
///
/// Functions `1..m-1`: weights `k+1` on positions `1..k-1`, `3/2` at `k`,
/// `k` afterwards. Function `m`: weights 1 on `1..k-1`, `k^2` at `k`, `k`
/// afterwards. The optimum `1^k 0^(n-k)` scores `k^2 + 1/2`; every string
/// with `k` ones and an all-zero `k`-prefix scores exactly `k^2`.
pub fn build_thm10_midk(n: usize, k: usize, m: usize) -> Result<WorstCaseInstance, ProblemError> {
    if !(2 <= k && 2 * k < n && m >= 2) {
        return Err(invalid(format!(
            "thm10_midk requires 2 <= k < n/2 and m >= 2, got n={n} k={k} m={m}"
        )));
    }
    let kq = int(k);
    let mut common = repeat_weight(int(k + 1), k - 1);
    common.extend(repeat_weight(BigRational::new(3.into(), 2.into()), 1));
    common.extend(repeat_weight(kq.clone(), n - k));
    let mut last = repeat_weight(int(1), k - 1);
    last.extend(repeat_weight(int(k * k), 1));
    last.extend(repeat_weight(kq, n - k));
    let mut objectives = vec![common; m - 1];
    objectives.push(last);
    let optimum = int(k * k) + BigRational::new(1.into(), 2.into());
    WorstCaseInstance::new(
        Family::Thm10MidK,
        objectives,
        k,
        Some(FitnessValue::new(optimum)),
    )
}

/// Plateau construction for `k >= n/2`: `m = k` functions, function `s`
/// has weight `n` at position `s` and 1 elsewhere. Optimum `n + k - 1`.
pub fn build_thm10_highk(n: usize, k: usize) -> Result<WorstCaseInstance, ProblemError> {
    if !(k >= 1 && 2 * k >= n && k <= n) {
        return Err(invalid(format!(
            "thm10_highk requires n/2 <= k <= n and k >= 1, got n={n} k={k}"
        )));
    }
    let objectives = (0..k)
        .map(|s| {
            let mut f = repeat_weight(int(1), n);
            f[s] = Weight::new(int(n)).expect(">= 1");
            f
        })
        .collect();
    WorstCaseInstance::new(
        Family::Thm10HighK,
        objectives,
        k,
        Some(FitnessValue::from_integer((n + k - 1) as i64)),
    )
}
