//! Least-squares fits of mean running times on a log scale.

use serde::Serialize;

use super::{ExperimentError, TrialStats};

#[derive(Debug, Clone, Copy)]
pub enum ScalingModel {
    /// `a · n ln n`
    NLogN,
    /// `a · n^b`
    Power,
    /// `a · e^(c · g(n))`
    Exponential { g: fn(f64) -> f64 },
    /// `a · C(n, k)`
    Binomial,
}

impl ScalingModel {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingModel::NLogN => "a*n*ln(n)",
            ScalingModel::Power => "a*n^b",
            ScalingModel::Exponential { .. } => "a*exp(c*g(n))",
            ScalingModel::Binomial => "a*C(n,k)",
        }
    }

    /// Regressor on the log scale, and whether its slope is fitted.
    fn regressor(&self, p: &ScalingPoint) -> Result<(f64, bool), ExperimentError> {
        let n = p.n as f64;
        Ok(match self {
            ScalingModel::NLogN => {
                if p.n < 2 {
                    return Err(ExperimentError::Degenerate(
                        "n ln n vanishes at n = 1".into(),
                    ));
                }
                ((n * n.ln()).ln(), false)
            }
            ScalingModel::Power => (n.ln(), true),
            ScalingModel::Exponential { g } => (g(n), true),
            ScalingModel::Binomial => {
                if p.k > p.n {
                    return Err(ExperimentError::Degenerate(format!(
                        "k = {} exceeds n = {}",
                        p.k, p.n
                    )));
                }
                (ln_binomial(p.n, p.k), false)
            }
        })
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub k: usize,
    pub mean: f64,
    pub censored: bool,
}

impl From<&TrialStats> for ScalingPoint {
    fn from(s: &TrialStats) -> Self {
        ScalingPoint {
            n: s.n,
            k: s.k,
            mean: s.mean,
            censored: s.censored > 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub model: &'static str,
    pub a: f64,
    /// `b` for the power model, `c` for the exponential model.
    pub exponent: Option<f64>,
    /// Coefficient of determination of `ln(mean)`.
    pub r_squared: f64,
    pub cells: usize,
    /// Some input means were censored and only bound the truth from below.
    pub lower_bound: bool,
}

impl ScalingFit {
    pub fn predict(&self, model: ScalingModel, n: usize, k: usize) -> f64 {
        let p = ScalingPoint {
            n,
            k,
            mean: 1.0,
            censored: false,
        };
        let (x, free) = model.regressor(&p).expect("valid point");
        let slope = if free {
            self.exponent.expect("fitted slope")
        } else {
            1.0
        };
        self.a * (slope * x).exp()
    }
}

/// Fits `ln(mean) = ln(a) + slope · x(n)` by least squares. Censored
/// means are rejected unless `allow_lower_bounds` marks them as accepted
/// lower bounds.
pub fn fit_scaling(
    points: &[ScalingPoint],
    model: ScalingModel,
    allow_lower_bounds: bool,
) -> Result<ScalingFit, ExperimentError> {
    if points.len() < 3 {
        return Err(ExperimentError::TooFewCells(points.len()));
    }
    let censored = points.iter().filter(|p| p.censored).count();
    if censored > 0 && !allow_lower_bounds {
        return Err(ExperimentError::Censored(censored));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.mean > 0.0 && p.mean.is_finite()))
    {
        return Err(ExperimentError::Degenerate(format!(
            "mean {} at n = {} is not positive",
            p.mean, p.n
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut free = false;
    for p in points {
        let (x, f) = model.regressor(p)?;
        xs.push(x);
        free = f;
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(ExperimentError::Degenerate(
            "all cells share the same regressor (e.g. equal n)".into(),
        ));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.mean.ln()).collect();
    let len = points.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / len;
    let y_bar = ys.iter().sum::<f64>() / len;
    let (slope, intercept) = if free {
        let sxy: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - x_bar) * (y - y_bar))
            .sum();
        let sxx: f64 = xs.iter().map(|x| (x - x_bar).powi(2)).sum();
        let slope = sxy / sxx;
        (slope, y_bar - slope * x_bar)
    } else {
        (1.0, y_bar - x_bar)
    };
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - y_bar).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON {
        1.0
    } else {
        0.0
    };
    Ok(ScalingFit {
        model: model.name(),
        a: intercept.exp(),
        exponent: free.then_some(slope),
        r_squared,
        cells: points.len(),
        lower_bound: censored > 0,
    })
}
