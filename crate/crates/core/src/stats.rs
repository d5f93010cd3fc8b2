//! Statistic transforms and per-window standardized scores.
//!
//! Every pooled statistic has the form `sum_i g(U_i)` where `U_i` is the
//! standardized window sum of sequence `i` and `g` is one of:
//!
//! * sum of chi-squares: `g(z) = z^2`
//! * mixture likelihood ratio: `g(z) = log(1 - p0 + p0 exp(z^2 / 2))`
//! * weighted chi-squares: `g(z) = w(z^2) z^2 / 2` with
//!   `w(x) = exp(x/2) / (r + exp(x/2))`, `r = (1 - p0) / p0`

use crate::error::{Error, Result};
use crate::matrix::IntensityMatrix;
use crate::order;

/// Beyond this `|z|` the mixture transform switches to its log-sum form so
/// that `exp(z^2/2)` is never formed.
const MIXTURE_LOG_SUM_SWITCH: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticKind {
    SumChiSq,
    Mixture,
    Weighted,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::SumChiSq => "sumchisq",
            StatisticKind::Mixture => "mixture",
            StatisticKind::Weighted => "weighted",
        }
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sumchisq" | "sum-chi-sq" | "chisq" => Ok(StatisticKind::SumChiSq),
            "mixture" => Ok(StatisticKind::Mixture),
            "weighted" => Ok(StatisticKind::Weighted),
            other => Err(Error::InvalidConfig(format!("unknown statistic '{other}'"))),
        }
    }
}

/// Which transform `g` is in force, with its prior carrier fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticSpec {
    kind: StatisticKind,
    p0: f64,
    /// Prior odds against carrying, `(1 - p0) / p0`.
    odds: f64,
}

impl StatisticSpec {
    pub fn sum_chi_sq() -> Self {
        Self {
            kind: StatisticKind::SumChiSq,
            p0: 1.0,
            odds: 0.0,
        }
    }

    pub fn mixture(p0: f64) -> Result<Self> {
        Self::new(StatisticKind::Mixture, p0)
    }

    pub fn weighted(p0: f64) -> Result<Self> {
        Self::new(StatisticKind::Weighted, p0)
    }

    /// `p0` is ignored for [`StatisticKind::SumChiSq`].
    pub fn new(kind: StatisticKind, p0: f64) -> Result<Self> {
        if kind == StatisticKind::SumChiSq {
            return Ok(Self::sum_chi_sq());
        }
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(Error::InvalidConfig(format!("p0 must lie in (0, 1], got {p0}")));
        }
        Ok(Self {
            kind,
            p0,
            odds: (1.0 - p0) / p0,
        })
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Coefficient `a` of the quadratic growth `g(z) ~ a z^2` as `|z| -> inf`.
    pub fn growth(&self) -> f64 {
        match self.kind {
            StatisticKind::SumChiSq => 1.0,
            StatisticKind::Mixture | StatisticKind::Weighted => 0.5,
        }
    }

    /// Upper end of the tilt domain: `E exp(theta g(Z))` is finite iff
    /// `theta < 1 / (2a)`.
    pub fn theta_max(&self) -> f64 {
        0.5 / self.growth()
    }

    /// The transform `g(z)`. Even in `z`, non-negative.
    pub fn g(&self, z: f64) -> f64 {
        match self.kind {
            StatisticKind::SumChiSq => z * z,
            StatisticKind::Mixture => {
                let half_sq = 0.5 * z * z;
                if self.p0 == 1.0 {
                    half_sq
                } else if z.abs() <= MIXTURE_LOG_SUM_SWITCH {
                    (self.p0 * half_sq.exp_m1()).ln_1p()
                } else {
                    half_sq + (self.p0 + (1.0 - self.p0) * (-half_sq).exp()).ln()
                }
            }
            StatisticKind::Weighted => {
                let half_sq = 0.5 * z * z;
                half_sq / (1.0 + self.odds * (-half_sq).exp())
            }
        }
    }

    /// Derivative `dg/dz`. Odd in `z`.
    pub fn g_deriv(&self, z: f64) -> f64 {
        match self.kind {
            StatisticKind::SumChiSq => 2.0 * z,
            // z p0 e^{x} / (1 - p0 + p0 e^{x}) == z / (1 + r e^{-x})
            StatisticKind::Mixture => z / (1.0 + self.odds * (-0.5 * z * z).exp()),
            StatisticKind::Weighted => {
                let half_sq = 0.5 * z * z;
                let e = self.odds * (-half_sq).exp();
                let denom = 1.0 + e;
                z * (1.0 / denom + half_sq * e / (denom * denom))
            }
        }
    }

    /// Posterior-odds weight `w(x)` evaluated at `x = z^2`.
    pub fn weight(&self, chi_sq: f64) -> f64 {
        1.0 / (1.0 + self.odds * (-0.5 * chi_sq).exp())
    }

    /// `sum_i g(u_i)`.
    pub fn pooled_score(&self, u: &[f64]) -> f64 {
        u.iter().map(|&z| self.g(z)).sum()
    }
}

impl std::fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            StatisticKind::SumChiSq => write!(f, "sumchisq"),
            k => write!(f, "{}(p0={})", k.name(), self.p0),
        }
    }
}

/// Free-function form of [`StatisticSpec::g`].
pub fn g_eval(spec: &StatisticSpec, z: f64) -> f64 {
    spec.g(z)
}

pub fn g_deriv(spec: &StatisticSpec, z: f64) -> f64 {
    spec.g_deriv(z)
}

pub fn pooled_score(spec: &StatisticSpec, u: &[f64]) -> f64 {
    spec.pooled_score(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimationMode {
    /// Sample mean and maximum-likelihood standard deviation.
    #[default]
    Mle,
    /// Median and half the 84%/16% quantile spread.
    Robust,
}

impl std::str::FromStr for EstimationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(EstimationMode::Mle),
            "robust" => Ok(EstimationMode::Robust),
            other => Err(Error::InvalidConfig(format!("unknown estimation mode '{other}'"))),
        }
    }
}

impl EstimationMode {
    pub fn name(self) -> &'static str {
        match self {
            EstimationMode::Mle => "mle",
            EstimationMode::Robust => "robust",
        }
    }
}

/// Baseline level and noise scale of one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceBaseline {
    pub mean: f64,
    pub sd: f64,
}

pub fn estimate_baseline(row: &[f64], mode: EstimationMode) -> Result<SequenceBaseline> {
    if row.len() < 2 {
        return Err(Error::InvalidMatrix(format!(
            "need at least 2 observations, got {}",
            row.len()
        )));
    }
    let (mean, sd) = match mode {
        EstimationMode::Mle => {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let ss = row.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>();
            (mean, (ss / n).sqrt())
        }
        EstimationMode::Robust => (order::median(row), order::quantile_spread(row)),
    };
    if !(sd > 0.0) {
        return Err(Error::DegenerateRow { row: None });
    }
    Ok(SequenceBaseline { mean, sd })
}

/// Baselines for every row, tagging a degenerate row with its index.
pub fn estimate_baselines(
    data: &IntensityMatrix,
    mode: EstimationMode,
) -> Result<Vec<SequenceBaseline>> {
    data.rows()
        .enumerate()
        .map(|(i, row)| {
            estimate_baseline(row, mode).map_err(|e| match e {
                Error::DegenerateRow { .. } => Error::DegenerateRow { row: Some(i) },
                other => other,
            })
        })
        .collect()
}

/// Standardized statistic `U(s, t)` of the window `(s, t]` with estimated
/// baseline:
///
/// `U = (S_t - S_s - (t - s) mean) / (sd sqrt((t - s)(1 - (t - s)/T)))`.
pub fn window_u(row: &[f64], baseline: &SequenceBaseline, s: usize, t: usize) -> Result<f64> {
    let len = row.len();
    if s >= t || t > len || t - s >= len {
        return Err(Error::InvalidWindow { s, t, len });
    }
    let tau = (t - s) as f64;
    let sum: f64 = row[s..t].iter().sum();
    let scale = (tau * (1.0 - tau / len as f64)).sqrt();
    Ok((sum - tau * baseline.mean) / (baseline.sd * scale))
}

/// Known-parameter window score `W / sqrt(tau)` for unit-variance,
/// zero-mean data.
pub fn known_z(window_sum: f64, tau: usize) -> f64 {
    window_sum / (tau as f64).sqrt()
}

/// A window `(s, s + tau]` and its pooled score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowScore {
    pub s: usize,
    pub tau: usize,
    pub value: f64,
}

impl WindowScore {
    pub fn end(&self) -> usize {
        self.s + self.tau
    }

    /// Larger score wins; equal scores go to the smaller start, then the
    /// shorter window. This order is total, so any reduction tree agrees.
    pub fn better(self, other: Self) -> Self {
        use std::cmp::Ordering::*;
        match self.value.total_cmp(&other.value) {
            Greater => self,
            Less => other,
            Equal => {
                if (self.s, self.tau) <= (other.s, other.tau) {
                    self
                } else {
                    other
                }
            }
        }
    }
}
