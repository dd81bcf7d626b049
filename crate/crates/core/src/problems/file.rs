//! TOML instance files.
//!
//! ```toml
//! family = "linear"      # onemax | binval | linear | worstcase | thm8
//!                        # | thm10_k1 | thm10_midk | thm10_highk
//! n = 4
//! k = 3
//! d = 1                  # deletion families only
//! weights = [5, "3/2", 2, 1]
//! ```
//!
//! Builder families only carry their parameters (`thm8` takes `n, d`;
//! `thm10_k1` takes `n, m`; `thm10_midk` takes `n, k, m`; `thm10_highk`
//! takes `n, k`). `linear` takes `weights` in user order, `worstcase` takes
//! `weight_matrix` with one row per function. Rationals are written as
//! `"p/q"` strings, integers as plain integers (or decimal strings when they
//! exceed 64 bits). `optimum` is optional and only read for `worstcase`.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{
    build_binval, build_linear, build_onemax, build_thm10_highk, build_thm10_k1, build_thm10_midk,
    build_thm8_plateau, build_worst, format_rational, parse_rational, Family, Instance,
    ProblemError,
};

/// A rational as it appears in an instance file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalText {
    Int(i64),
    Text(String),
}

impl RationalText {
    pub fn parse(&self) -> Result<BigRational, ProblemError> {
        match self {
            RationalText::Int(v) => Ok(BigRational::from_integer(BigInt::from(*v))),
            RationalText::Text(s) => parse_rational(s),
        }
    }

    pub fn from_rational(v: &BigRational) -> Self {
        if v.is_integer() {
            if let Ok(small) = i64::try_from(v.numer()) {
                return RationalText::Int(small);
            }
        }
        RationalText::Text(format_rational(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub family: Family,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<RationalText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_matrix: Option<Vec<Vec<RationalText>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<RationalText>,
}

fn required(value: Option<usize>, name: &str, family: Family) -> Result<usize, ProblemError> {
    value.ok_or_else(|| ProblemError::Malformed(format!("family {family} requires field `{name}`")))
}

fn forbid<T>(value: &Option<T>, name: &str, family: Family) -> Result<(), ProblemError> {
    if value.is_some() {
        return Err(ProblemError::Malformed(format!(
            "field `{name}` is not used by family {family}"
        )));
    }
    Ok(())
}

impl InstanceFile {
    pub fn from_toml(text: &str) -> Result<Self, ProblemError> {
        toml::from_str(text).map_err(|e| ProblemError::Malformed(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance files always serialize")
    }

    /// Shorthand file for a builder family.
    pub fn builder(
        family: Family,
        n: usize,
        k: Option<usize>,
        d: Option<usize>,
        m: Option<usize>,
    ) -> Self {
        InstanceFile {
            family,
            n,
            k,
            d,
            m,
            weights: None,
            weight_matrix: None,
            optimum: None,
        }
    }

    pub fn build(&self) -> Result<Instance, ProblemError> {
        let f = self.family;
        if f != Family::Linear {
            forbid(&self.weights, "weights", f)?;
        }
        if f != Family::WorstCase {
            forbid(&self.weight_matrix, "weight_matrix", f)?;
            forbid(&self.optimum, "optimum", f)?;
        }
        if !f.is_deletion() {
            forbid(&self.d, "d", f)?;
        }
        let n = self.n;
        let inst: Instance = match f {
            Family::OneMax => {
                forbid(&self.m, "m", f)?;
                build_onemax(n, required(self.k, "k", f)?, required(self.d, "d", f)?)?.into()
            }
            Family::BinVal => {
                forbid(&self.m, "m", f)?;
                build_binval(n, required(self.k, "k", f)?, required(self.d, "d", f)?)?.into()
            }
            Family::Thm8 => {
                forbid(&self.m, "m", f)?;
                let d = required(self.d, "d", f)?;
                if let Some(k) = self.k {
                    if k != d + 1 {
                        return Err(ProblemError::Malformed(format!(
                            "thm8 fixes k = d + 1 = {}, file says k = {k}",
                            d + 1
                        )));
                    }
                }
                build_thm8_plateau(n, d)?.into()
            }
            Family::Linear => {
                forbid(&self.m, "m", f)?;
                let weights = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| {
                        ProblemError::Malformed("family linear requires `weights`".into())
                    })?
                    .iter()
                    .map(RationalText::parse)
                    .collect::<Result<Vec<_>, _>>()?;
                if weights.len() != n {
                    return Err(ProblemError::Malformed(format!(
                        "n = {n} but {} weights given",
                        weights.len()
                    )));
                }
                build_linear(
                    weights,
                    required(self.k, "k", f)?,
                    required(self.d, "d", f)?,
                )?
                .into()
            }
            Family::WorstCase => {
                let matrix = self
                    .weight_matrix
                    .as_ref()
                    .ok_or_else(|| {
                        ProblemError::Malformed("family worstcase requires `weight_matrix`".into())
                    })?
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(RationalText::parse)
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(m) = self.m {
                    if m != matrix.len() {
                        return Err(ProblemError::Malformed(format!(
                            "m = {m} but {} functions given",
                            matrix.len()
                        )));
                    }
                }
                if matrix.first().map(Vec::len) != Some(n) {
                    return Err(ProblemError::Malformed(format!(
                        "weight_matrix rows must have n = {n} entries"
                    )));
                }
                let optimum = self.optimum.as_ref().map(RationalText::parse).transpose()?;
                build_worst(matrix, required(self.k, "k", f)?, optimum)?.into()
            }
            Family::Thm10K1 => {
                if let Some(k) = self.k {
                    if k != 1 {
                        return Err(ProblemError::Malformed(format!(
                            "thm10_k1 fixes k = 1, file says k = {k}"
                        )));
                    }
                }
                build_thm10_k1(n, required(self.m, "m", f)?)?.into()
            }
            Family::Thm10MidK => {
                build_thm10_midk(n, required(self.k, "k", f)?, required(self.m, "m", f)?)?.into()
            }
            Family::Thm10HighK => {
                let k = required(self.k, "k", f)?;
                if let Some(m) = self.m {
                    if m != k {
                        return Err(ProblemError::Malformed(format!(
                            "thm10_highk fixes m = k = {k}, file says m = {m}"
                        )));
                    }
                }
                build_thm10_highk(n, k)?.into()
            }
        };
        Ok(inst)
    }
}

impl Instance {
    /// Canonical file for this instance. Builder families serialize their
    /// parameters; general families serialize weights in user order.
    pub fn to_file(&self) -> InstanceFile {
        let family = self.family();
        let mut file = InstanceFile::builder(family, self.n(), Some(self.k()), self.d(), None);
        match (family, self) {
            (Family::Linear, Instance::Deletion(inst)) => {
                file.weights = Some(
                    inst.objective()
                        .user_weights()
                        .iter()
                        .map(|w| RationalText::from_rational(w.value()))
                        .collect(),
                );
            }
            (Family::WorstCase, Instance::Worst(inst)) => {
                file.m = Some(inst.m());
                file.weight_matrix = Some(
                    inst.objectives()
                        .iter()
                        .map(|row| {
                            row.iter()
                                .map(|w| RationalText::from_rational(w.value()))
                                .collect()
                        })
                        .collect(),
                );
                file.optimum = inst
                    .optimum_value()
                    .map(|v| RationalText::from_rational(v.value()));
            }
            (Family::Thm10K1 | Family::Thm10MidK | Family::Thm10HighK, _) => {
                file.m = self.m();
            }
            _ => {}
        }
        file
    }
}
