use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ProblemError;

/// Parses `"p/q"`, `"-p/q"` or a plain integer.
pub fn parse_rational(text: &str) -> Result<BigRational, ProblemError> {
    let bad = || ProblemError::BadRational(text.to_string());
    let t = text.trim();
    match t.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(t.parse().map_err(|_| bad())?)),
    }
}

/// `"p/q"` in lowest terms, or `"p"` for integers.
pub fn format_rational(v: &BigRational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Exact, totally ordered fitness value.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FitnessValue(BigRational);

impl FitnessValue {
    pub fn new(v: BigRational) -> Self {
        FitnessValue(v)
    }

    pub fn from_integer(v: i64) -> Self {
        FitnessValue(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn zero() -> Self {
        FitnessValue(BigRational::zero())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_inner(self) -> BigRational {
        self.0
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Lossy, for reporting only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for FitnessValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl fmt::Debug for FitnessValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FitnessValue({self})")
    }
}

/// A weight, always `>= 1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(BigRational);

impl Weight {
    pub fn new(v: BigRational) -> Result<Self, ProblemError> {
        if v < BigRational::one() {
            return Err(ProblemError::WeightBelowOne(format_rational(&v)));
        }
        Ok(Weight(v))
    }

    pub fn one() -> Self {
        Weight(BigRational::one())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_text_round_trip() {
        for s in ["3/2", "-7/3", "5", "0", "1267650600228229401496703205376"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
        assert_eq!(format_rational(&parse_rational("6/4").unwrap()), "3/2");
        assert_eq!(format_rational(&parse_rational("4/2").unwrap()), "2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn weights_below_one_rejected() {
        assert!(Weight::new(parse_rational("1").unwrap()).is_ok());
        assert_eq!(
            Weight::new(parse_rational("2/3").unwrap()),
            Err(ProblemError::WeightBelowOne("2/3".into()))
        );
    }
}
