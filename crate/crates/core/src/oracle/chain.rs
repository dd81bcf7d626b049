use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::solve::{Scalar, TransientSystem};
use super::OracleError;
use crate::bitvec::BitString;
use crate::problems::Instance;

/// Largest `n` for the one-count chain.
pub const MAX_LUMPED_N: usize = 2000;
/// Largest `n` for the exact rational one-count chain.
pub const MAX_EXACT_LUMPED_N: usize = 64;
/// Largest `n` for the full `2^n`-state chain (dense `4096 x 4096`).
pub const MAX_FULL_N: usize = 12;

/// Which process the one-count chain models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LumpedKind {
    /// (1+1)-EA on deletion-robust OneMax; absorbing at exactly `k` ones.
    DeletionOneMax,
    /// Walk accepting every offspring; absorbing at more than `d` ones.
    AcceptAllWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialDistribution {
    Uniform,
    /// A fixed one-count (lumped chain) or bit-string index (full chain).
    Point(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Float,
    /// Exact rational arithmetic throughout; limited to small `n`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSpace {
    /// State `j` is the number of 1-bits, `0..=n`.
    OnesCount { n: usize },
    /// State `c` is the bit-string [`BitString::from_index`]`(n, c)`.
    Full { n: usize },
}

impl StateSpace {
    pub fn len(&self) -> usize {
        match *self {
            StateSpace::OnesCount { n } => n + 1,
            StateSpace::Full { n } => 1 << n,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Expected first hitting times of the absorbing set, per state, in
/// iterations. `mean_evaluations` adds the evaluation of the initial
/// solution: `1 + Σ π0(s) efht(s)`.
#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub states: StateSpace,
    pub absorbing: Vec<bool>,
    pub efht: Vec<f64>,
    pub exact_efht: Option<Vec<BigRational>>,
    pub mean_evaluations: f64,
    pub exact_mean_evaluations: Option<BigRational>,
    /// Largest row residual of `(I - Q) t = 1`, relative to the magnitude
    /// of the terms in that row.
    pub residual: f64,
}

impl ChainSolution {
    /// `state,efht` table, one row per state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,absorbing,efht\n");
        for (s, (t, a)) in self.efht.iter().zip(&self.absorbing).enumerate() {
            let label = match self.states {
                StateSpace::OnesCount { .. } => s.to_string(),
                StateSpace::Full { n } => BitString::from_index(n, s as u64)
                    .expect("n >= 1")
                    .to_string(),
            };
            writeln!(out, "{label},{a},{t}").expect("writing to a string");
        }
        out
    }
}

/// Relative residual tolerance enforced on float solves.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// `P(B = a)` for `B ~ Binomial(m, p)`, `a = 0..=m`.
pub fn binomial_pmf(m: usize, p: f64) -> Vec<f64> {
    let mut ln_fact = vec![0.0f64; m + 1];
    for i in 1..=m {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=m)
        .map(|a| {
            if p == 0.0 {
                return if a == 0 { 1.0 } else { 0.0 };
            }
            if p == 1.0 {
                return if a == m { 1.0 } else { 0.0 };
            }
            (ln_fact[m] - ln_fact[a] - ln_fact[m - a] + a as f64 * lp + (m - a) as f64 * lq).exp()
        })
        .collect()
}

/// Flip-count masses for `m` bits at rate `1/n`, by the ratio recurrence
/// from `(1 - 1/n)^m`; stops once the masses underflow.
fn flip_pmf_f64(m: usize, n: usize) -> Vec<f64> {
    let p = 1.0 / n as f64;
    let mut out = vec![0.0; m + 1];
    if n == 1 {
        out[m] = 1.0;
        return out;
    }
    let ratio = p / (1.0 - p);
    let mut cur = (1.0 - p).powi(m as i32);
    for (a, slot) in out.iter_mut().enumerate() {
        *slot = cur;
        if a < m {
            cur *= (m - a) as f64 / (a + 1) as f64 * ratio;
            if cur == 0.0 {
                break;
            }
        }
    }
    out
}

fn flip_pmf_exact(m: usize, n: usize) -> Vec<BigRational> {
    let p = BigRational::new(BigInt::one(), BigInt::from(n));
    let q = BigRational::one() - &p;
    let mut out = Vec::with_capacity(m + 1);
    let mut binom = BigInt::one();
    for a in 0..=m {
        out.push(
            BigRational::from_integer(binom.clone())
                * num_traits::pow(p.clone(), a)
                * num_traits::pow(q.clone(), m - a),
        );
        binom = binom * BigInt::from(m - a) / BigInt::from(a + 1);
    }
    out
}

/// `P(Y - X = i)` for `X ~ B(j, 1/n)` flipped 1-bits and
/// `Y ~ B(n - j, 1/n)` flipped 0-bits; entry `i + j` holds offset `i`,
/// covering `i = -j..=n-j`.
pub fn mutation_delta_pmf(n: usize, j: usize) -> Vec<f64> {
    convolve(&flip_pmf_f64(j, n), &flip_pmf_f64(n - j, n), j, n)
}

fn convolve<T: Scalar>(x_pmf: &[T], y_pmf: &[T], j: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    for (a, px) in x_pmf.iter().enumerate() {
        if px.is_zero() {
            continue;
        }
        for (b, py) in y_pmf.iter().enumerate() {
            if py.is_zero() {
                continue;
            }
            // offset b - a lands at index j + b - a
            let idx = j + b - a;
            out[idx] = out[idx].clone() + px.clone() * py.clone();
        }
    }
    out
}

struct LumpedRule {
    kind: LumpedKind,
    k: usize,
    d: usize,
}

impl LumpedRule {
    fn absorbing(&self, j: usize) -> bool {
        match self.kind {
            LumpedKind::DeletionOneMax => j == self.k,
            LumpedKind::AcceptAllWalk => j > self.d,
        }
    }

    /// Deletion-robust OneMax fitness as a function of the one-count.
    fn fitness(&self, j: usize) -> i64 {
        let (j, k, d) = (j as i64, self.k as i64, self.d as i64);
        if j > k {
            k - j
        } else {
            (j - d).max(0)
        }
    }

    fn accepts(&self, from: usize, to: usize) -> bool {
        match self.kind {
            LumpedKind::DeletionOneMax => self.fitness(to) >= self.fitness(from),
            LumpedKind::AcceptAllWalk => true,
        }
    }
}

fn build_lumped<T: Scalar>(
    n: usize,
    rule: &LumpedRule,
    delta: impl Fn(usize) -> Vec<T>,
) -> (TransientSystem<T>, Vec<Option<usize>>, Vec<T>) {
    let index: Vec<Option<usize>> = {
        let mut next = 0;
        (0..=n)
            .map(|j| {
                (!rule.absorbing(j)).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let t = index.iter().flatten().count();
    let mut sys = TransientSystem::new(t);
    let mut row_sums = vec![T::zero(); t];
    for j in 0..=n {
        let Some(row) = index[j] else { continue };
        let pmf = delta(j);
        for (to, p) in pmf.into_iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            row_sums[row] = row_sums[row].clone() + p.clone();
            if to == j || !rule.accepts(j, to) {
                continue;
            }
            match index[to] {
                Some(col) => sys.add(row, col, p),
                None => sys.add_absorb(row, p),
            }
        }
    }
    (sys, index, row_sums)
}

fn check_rows(row_sums: &[f64], index: &[Option<usize>]) -> Result<(), OracleError> {
    for (state, idx) in index.iter().enumerate() {
        if let Some(r) = idx {
            if (row_sums[*r] - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(OracleError::RowSum {
                    state,
                    sum: row_sums[*r],
                });
            }
        }
    }
    Ok(())
}

/// Exact expected hitting times of the one-count chain.
///
/// For `DeletionOneMax` the fitness depends on the one-count only, so the
/// projection of the (1+1)-EA onto `|x|_1` is itself a Markov chain: from
/// `j` ones the offspring has `j + Y - X` ones and is accepted when its
/// fitness is no worse. `k` is ignored for `AcceptAllWalk`.
pub fn lumped_chain_efht(
    kind: LumpedKind,
    n: usize,
    k: usize,
    d: usize,
    init: InitialDistribution,
    precision: Precision,
) -> Result<ChainSolution, OracleError> {
    if n == 0 {
        return Err(OracleError::InvalidParameters(
            "n must be at least 1".into(),
        ));
    }
    if n > MAX_LUMPED_N {
        return Err(OracleError::TooLarge {
            what: "n",
            value: n,
            limit: MAX_LUMPED_N,
        });
    }
    match kind {
        LumpedKind::DeletionOneMax if !(d < k && k <= n) => {
            return Err(OracleError::InvalidParameters(format!(
                "deletion-robust OneMax requires d < k <= n, got n={n} k={k} d={d}"
            )))
        }
        LumpedKind::AcceptAllWalk if d >= n => {
            return Err(OracleError::InvalidParameters(format!(
                "accept-all walk requires d < n, got n={n} d={d}"
            )))
        }
        _ => {}
    }
    if let InitialDistribution::Point(j) = init {
        if j > n {
            return Err(OracleError::InvalidParameters(format!(
                "initial one-count {j} exceeds n={n}"
            )));
        }
    }
    let rule = LumpedRule { kind, k, d };
    let states = StateSpace::OnesCount { n };

    let float_delta = |j: usize| mutation_delta_pmf(n, j);
    let (sys, index, sums) = build_lumped(n, &rule, float_delta);
    check_rows(&sums, &index)?;
    let residual_rows = rows_of(&sys);
    let t = sys.solve()?;
    let residual = relative_residual(&residual_rows, &t);
    if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
        return Err(OracleError::Residual {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    let efht: Vec<f64> = index.iter().map(|i| i.map_or(0.0, |i| t[i])).collect();
    let absorbing: Vec<bool> = index.iter().map(Option::is_none).collect();
    let init_weights = match init {
        InitialDistribution::Uniform => binomial_pmf(n, 0.5),
        InitialDistribution::Point(j) => {
            let mut w = vec![0.0; n + 1];
            w[j] = 1.0;
            w
        }
    };
    let mean_evaluations = 1.0
        + init_weights
            .iter()
            .zip(&efht)
            .map(|(w, t)| w * t)
            .sum::<f64>();

    let (exact_efht, exact_mean_evaluations) = match precision {
        Precision::Float => (None, None),
        Precision::Exact => {
            if n > MAX_EXACT_LUMPED_N {
                return Err(OracleError::TooLarge {
                    what: "n (exact)",
                    value: n,
                    limit: MAX_EXACT_LUMPED_N,
                });
            }
            let exact_delta =
                |j: usize| convolve(&flip_pmf_exact(j, n), &flip_pmf_exact(n - j, n), j, n);
            let (sys, index, sums) = build_lumped(n, &rule, exact_delta);
            if let Some(bad) = sums.iter().position(|s| !s.is_one()) {
                return Err(OracleError::RowSum {
                    state: bad,
                    sum: sums[bad].to_f64().unwrap_or(f64::NAN),
                });
            }
            let t = sys.solve()?;
            let efht: Vec<BigRational> = index
                .iter()
                .map(|i| i.map_or_else(BigRational::zero, |i| t[i].clone()))
                .collect();
            let two_n = BigInt::one() << n;
            let mean = match init {
                InitialDistribution::Uniform => {
                    let mut binom = BigInt::one();
                    let mut acc = BigRational::zero();
                    for (j, e) in efht.iter().enumerate() {
                        acc += BigRational::new(binom.clone(), two_n.clone()) * e;
                        binom = binom * BigInt::from(n - j) / BigInt::from(j + 1);
                    }
                    acc
                }
                InitialDistribution::Point(j) => efht[j].clone(),
            };
            (Some(efht), Some(mean + BigRational::one()))
        }
    };

    Ok(ChainSolution {
        states,
        absorbing,
        efht,
        exact_efht,
        mean_evaluations,
        exact_mean_evaluations,
        residual,
    })
}

/// Sparse copy of the transient rows, used to check the solution against
/// the original system.
struct ResidualRows {
    rows: Vec<Vec<(usize, f64)>>,
    absorb: Vec<f64>,
}

fn rows_of(sys: &TransientSystem<f64>) -> ResidualRows {
    let t = sys.size;
    let rows = (0..t)
        .map(|i| {
            (0..t)
                .filter(|&j| j != i && sys.q[i * t + j] != 0.0)
                .map(|j| (j, sys.q[i * t + j]))
                .collect()
        })
        .collect();
    ResidualRows {
        rows,
        absorb: sys.absorb.clone(),
    }
}

fn relative_residual(sys: &ResidualRows, t: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in sys.rows.iter().enumerate() {
        let leave: f64 = sys.absorb[i] + row.iter().map(|(_, p)| p).sum::<f64>();
        let inflow: f64 = row.iter().map(|&(j, p)| p * t[j]).sum();
        let lhs = leave * t[i] - inflow;
        let scale = leave * t[i] + inflow + 1.0;
        worst = worst.max((lhs - 1.0).abs() / scale);
    }
    worst
}

/// Exact expected hitting times on the full solution space `{0,1}^n`.
///
/// Transitions use the complete mutation kernel `(1/n)^h (1-1/n)^(n-h)` to
/// every string at Hamming distance `h`, followed by the instance's
/// acceptance rule. Optimal strings are absorbing. Only the uniform initial
/// distribution (or a fixed string) is supported.
pub fn full_chain_efht(
    inst: &Instance,
    init: InitialDistribution,
) -> Result<ChainSolution, OracleError> {
    let n = inst.n();
    if n > MAX_FULL_N {
        return Err(OracleError::TooLarge {
            what: "n",
            value: n,
            limit: MAX_FULL_N,
        });
    }
    let size = 1usize << n;
    if let InitialDistribution::Point(c) = init {
        if c >= size {
            return Err(OracleError::InvalidParameters(format!(
                "initial state {c} out of range for n={n}"
            )));
        }
    }
    let strings: Vec<BitString> = (0..size as u64)
        .map(|c| BitString::from_index(n, c).expect("n >= 1"))
        .collect();
    let fitness = strings
        .iter()
        .map(|x| inst.fitness(x))
        .collect::<Result<Vec<_>, _>>()?;
    // integer ranks keep the pairwise acceptance test cheap and exact
    let mut sorted = fitness.clone();
    sorted.sort();
    sorted.dedup();
    let rank: Vec<usize> = fitness
        .iter()
        .map(|f| sorted.binary_search(f).expect("present"))
        .collect();
    let absorbing = strings
        .iter()
        .map(|x| inst.is_optimal(x))
        .collect::<Result<Vec<_>, _>>()?;

    let p = 1.0 / n as f64;
    let shell: Vec<f64> = (0..=n)
        .map(|h| p.powi(h as i32) * (1.0 - p).powi((n - h) as i32))
        .collect();
    let mut index = vec![None; size];
    let mut t = 0;
    for (c, a) in absorbing.iter().enumerate() {
        if !a {
            index[c] = Some(t);
            t += 1;
        }
    }
    let mut sys = TransientSystem::<f64>::new(t);
    for x in 0..size {
        let Some(row) = index[x] else { continue };
        let mut sum = 0.0;
        for y in 0..size {
            let pr = shell[(x ^ y).count_ones() as usize];
            sum += pr;
            if y == x || rank[y] < rank[x] {
                continue;
            }
            match index[y] {
                Some(col) => sys.add(row, col, pr),
                None => sys.add_absorb(row, pr),
            }
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(OracleError::RowSum { state: x, sum });
        }
    }
    let residual_rows = rows_of(&sys);
    let sol = sys.solve()?;
    let residual = relative_residual(&residual_rows, &sol);
    if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
        return Err(OracleError::Residual {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    let efht: Vec<f64> = index.iter().map(|i| i.map_or(0.0, |i| sol[i])).collect();
    let mean_evaluations = 1.0
        + match init {
            InitialDistribution::Uniform => efht.iter().sum::<f64>() / size as f64,
            InitialDistribution::Point(c) => efht[c],
        };
    Ok(ChainSolution {
        states: StateSpace::Full { n },
        absorbing,
        efht,
        exact_efht: None,
        mean_evaluations,
        exact_mean_evaluations: None,
        residual,
    })
}
