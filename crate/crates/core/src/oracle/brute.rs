use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::OracleError;
use crate::bitvec::BitString;
use crate::problems::{DeletionRobustInstance, FitnessValue, Instance, ProblemError};

/// Largest number of selected items the deletion oracle accepts.
pub const MAX_BRUTE_ONES: usize = 24;
/// Largest number of deletion subsets enumerated for a single string.
pub const ENUMERATION_CAP: u128 = 5_000_000;
/// Largest `n` for exhaustive optimum search.
pub const MAX_BRUTE_N: usize = 20;

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Sums of subsets in either fixed or arbitrary precision, over a common
/// denominator.
enum Numerators {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

/// `min` over all `z ⊆ x` with `|z|_1 <= d` of `Σ w_i (x_i - z_i)`, by
/// enumerating every deletion subset.
pub fn brute_force_f(
    inst: &DeletionRobustInstance,
    x: &BitString,
) -> Result<FitnessValue, OracleError> {
    if x.len() != inst.n() {
        return Err(ProblemError::LengthMismatch {
            expected: inst.n(),
            got: x.len(),
        }
        .into());
    }
    let selected: Vec<usize> = x.iter_ones().collect();
    let s = selected.len();
    if s > MAX_BRUTE_ONES {
        return Err(OracleError::TooLarge {
            what: "ones",
            value: s,
            limit: MAX_BRUTE_ONES,
        });
    }
    let d = inst.d().min(s);
    let count: u128 = (0..=d).map(|j| binomial(s, j)).sum();
    if count > ENUMERATION_CAP {
        return Err(OracleError::EnumerationCap {
            count,
            cap: ENUMERATION_CAP,
        });
    }

    let weights: Vec<&BigRational> = selected
        .iter()
        .map(|&i| inst.objective().weights()[i].value())
        .collect();
    let denom = weights.iter().fold(BigInt::one(), |acc, w| {
        num_integer::lcm(acc, w.denom().clone())
    });
    let big: Vec<BigInt> = weights
        .iter()
        .map(|w| w.numer() * (&denom / w.denom()))
        .collect();
    let total: BigInt = big.iter().sum();
    let nums = match (
        i128::try_from(&total),
        big.iter()
            .map(i128::try_from)
            .collect::<Result<Vec<_>, _>>(),
    ) {
        (Ok(_), Ok(small)) => Numerators::Small(small),
        _ => Numerators::Big(big),
    };

    // the empty deletion is always admissible
    let mut best_remaining = total.clone();
    for size in 1..=d {
        // Gosper's hack over masks of `s` bits with `size` set bits
        let mut mask: u32 = (1u32 << size) - 1;
        let limit: u32 = 1u32 << s;
        while mask < limit {
            let remaining = match &nums {
                Numerators::Small(v) => {
                    let deleted: i128 = ones_of(mask).map(|i| v[i]).sum();
                    BigInt::from(i128::try_from(&total).expect("checked") - deleted)
                }
                Numerators::Big(v) => {
                    let deleted: BigInt = ones_of(mask).map(|i| &v[i]).sum();
                    &total - deleted
                }
            };
            if remaining < best_remaining {
                best_remaining = remaining;
            }
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }
    if best_remaining.is_zero() {
        return Ok(FitnessValue::zero());
    }
    Ok(FitnessValue::new(BigRational::new(best_remaining, denom)))
}

fn ones_of(mask: u32) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

/// Maximum of `F` over all strings with at most `k` ones. Deletion-robust
/// instances are evaluated with [`brute_force_f`], worst-case instances by
/// taking the minimum over their functions directly.
pub fn brute_force_optimum(inst: &Instance) -> Result<FitnessValue, OracleError> {
    let n = inst.n();
    if n > MAX_BRUTE_N {
        return Err(OracleError::TooLarge {
            what: "n",
            value: n,
            limit: MAX_BRUTE_N,
        });
    }
    let k = inst.k();
    let mut best: Option<FitnessValue> = None;
    for code in 0..1u64 << n {
        if code.count_ones() as usize > k {
            continue;
        }
        let x = BitString::from_index(n, code).expect("n >= 1");
        let v = match inst {
            Instance::Deletion(del) => brute_force_f(del, &x)?,
            Instance::Worst(w) => {
                let mut m: Option<FitnessValue> = None;
                for s in 0..w.m() {
                    let v = w.eval_function(s, &x)?;
                    if m.as_ref().is_none_or(|m| v < *m) {
                        m = Some(v);
                    }
                }
                m.expect("m >= 1")
            }
        };
        if best.as_ref().is_none_or(|b| v > *b) {
            best = Some(v);
        }
    }
    Ok(best.expect("the empty string is always feasible"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitvec::RandomSource;
    use crate::problems::{
        build_binval, build_linear, build_onemax, build_thm10_highk, build_thm10_k1,
        build_thm10_midk, build_thm8_plateau, parse_rational,
    };
    use rand::Rng;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn random_weights(n: usize, rng: &mut RandomSource) -> Vec<BigRational> {
        (0..n)
            .map(|_| {
                let den: i64 = rng.gen_range(1..=5);
                let num: i64 = den + rng.gen_range(0..=4 * den);
                BigRational::new(num.into(), den.into())
            })
            .collect()
    }

    #[test]
    fn deleting_everything_gives_zero() {
        let inst = build_linear(vec![q("3"), q("5/2"), q("2"), q("1")], 3, 2).unwrap();
        for s in ["0000", "1000", "0101", "0011"] {
            let x: BitString = s.parse().unwrap();
            assert_eq!(
                brute_force_f(&inst, &x).unwrap(),
                FitnessValue::zero(),
                "{s}"
            );
        }
    }

    #[test]
    fn no_deletion_is_plain_sum() {
        let inst = build_linear(vec![q("3"), q("5/2"), q("2"), q("1")], 3, 0).unwrap();
        let x: BitString = "1101".parse().unwrap();
        assert_eq!(
            brute_force_f(&inst, &x).unwrap(),
            FitnessValue::new(q("13/2"))
        );
    }

    #[test]
    fn agrees_with_closed_form_exhaustively() {
        let mut rng = RandomSource::new(77);
        for n in [1usize, 5, 9, 12] {
            for _ in 0..3 {
                let w = random_weights(n, &mut rng);
                for d in 0..=4.min(n - 1) {
                    let inst = build_linear(w.clone(), n, d).unwrap();
                    for code in 0..1u64 << n {
                        let x = BitString::from_index(n, code).unwrap();
                        assert_eq!(brute_force_f(&inst, &x).unwrap(), inst.eval_f(&x).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn big_weights_use_arbitrary_precision() {
        let inst = build_binval(100, 5, 2).unwrap();
        let mut x = BitString::zeros(100).unwrap();
        for i in [3, 10, 50, 98, 99] {
            x.set(i, true);
        }
        assert_eq!(brute_force_f(&inst, &x).unwrap(), inst.eval_f(&x).unwrap());
    }

    #[test]
    fn caps_are_enforced() {
        let inst = build_onemax(30, 26, 12).unwrap();
        let x = BitString::leading_ones(30, 25).unwrap();
        assert!(matches!(
            brute_force_f(&inst, &x),
            Err(OracleError::TooLarge { .. })
        ));
        let inst = build_onemax(24, 24, 12).unwrap();
        let x = BitString::leading_ones(24, 24).unwrap();
        assert!(matches!(
            brute_force_f(&inst, &x),
            Err(OracleError::EnumerationCap { .. })
        ));
        let inst: Instance = build_onemax(21, 3, 1).unwrap().into();
        assert!(matches!(
            brute_force_optimum(&inst),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn optimum_matches_stored_values() {
        let cases: Vec<Instance> = vec![
            build_onemax(10, 6, 2).unwrap().into(),
            build_binval(10, 6, 2).unwrap().into(),
            build_thm8_plateau(10, 4).unwrap().into(),
            build_thm10_k1(9, 2).unwrap().into(),
            build_thm10_midk(12, 3, 2).unwrap().into(),
            build_thm10_highk(10, 6).unwrap().into(),
        ];
        for inst in cases {
            assert_eq!(
                &brute_force_optimum(&inst).unwrap(),
                inst.optimum_value().unwrap(),
                "{}",
                inst.family()
            );
        }
        let midk: Instance = build_thm10_midk(12, 3, 2).unwrap().into();
        assert_eq!(
            brute_force_optimum(&midk).unwrap(),
            FitnessValue::new(q("19/2"))
        );
        let highk: Instance = build_thm10_highk(10, 6).unwrap().into();
        assert_eq!(
            brute_force_optimum(&highk).unwrap(),
            FitnessValue::from_integer(15)
        );
    }
}
