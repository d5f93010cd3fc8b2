//! Analytic false-positive rate of the multi-sample scan and its inverse.
//!
//! For standard normal noise the cumulant generating function
//! `psi(theta) = log E exp(theta g(Z))` does not depend on the window
//! length. The tail probability of `max_{s,tau} sum_i g(Z_i)` at level `x`
//! is approximated by tilting to `theta` with `psi'(theta) = x / N`:
//!
//! ```text
//! sum_{tau=T0}^{T1} (T - tau) exp(-N [theta psi' - psi]) (2 pi N psi'')^{-1/2}
//!     theta^{-1} mu(theta)^2 (N / tau)^2 nu(sqrt(2 mu(theta) N / tau))^2
//! ```
//!
//! with `mu(theta) = theta^2 / 2 * E_theta[g'(Z)^2]`. The integral form
//! replaces the sum over `tau` by an integral over `t = tau / T`.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::stats::StatisticSpec;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
const QUAD_REL_TOL: f64 = 1e-11;
/// The Gaussian-weighted integrands are dropped once `exp(-70)` below the peak
/// decay envelope; 12 standard deviations is the floor.
const TAIL_EXPONENT: f64 = 70.0;
const MIN_HALF_WIDTH: f64 = 12.0;
/// Fraction of `theta_max` the root finder may approach.
const THETA_CAP: f64 = 1.0 - 1e-6;

/// Scan dimensions entering the approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanGeometry {
    pub n_samples: usize,
    pub n_probes: usize,
    pub t0: usize,
    pub t1: usize,
}

impl ScanGeometry {
    pub fn new(n_samples: usize, n_probes: usize, t0: usize, t1: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidConfig("need at least one sample".into()));
        }
        if t0 == 0 || t0 > t1 || t1 >= n_probes {
            return Err(Error::InvalidConfig(format!(
                "window lengths must satisfy 1 <= t0 <= t1 < T (t0={t0}, t1={t1}, T={n_probes})"
            )));
        }
        Ok(Self {
            n_samples,
            n_probes,
            t0,
            t1,
        })
    }
}

/// `psi` and its first two derivatives at one tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub psi: f64,
    pub psi_dot: f64,
    pub psi_ddot: f64,
}

/// Everything the approximation needs at the solved tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltState {
    pub theta: f64,
    pub psi: f64,
    pub psi_dot: f64,
    pub psi_ddot: f64,
    pub mu_theta: f64,
}

impl TiltState {
    /// Evaluates all tilt quantities at `theta` in one quadrature pass.
    pub fn at(spec: &StatisticSpec, theta: f64) -> Result<Self> {
        check_domain(spec, theta)?;
        let [m0, m1, m2, m3] = tilted_integrals(spec, theta);
        let psi_dot = m1 / m0;
        Ok(Self {
            theta,
            psi: m0.ln(),
            psi_dot,
            psi_ddot: m2 / m0 - psi_dot * psi_dot,
            mu_theta: 0.5 * theta * theta * m3 / m0,
        })
    }

    /// Variance `N theta^2 psi''` of the tilted log-likelihood ratio.
    pub fn sigma_sq(&self, n_samples: usize) -> f64 {
        n_samples as f64 * self.theta * self.theta * self.psi_ddot
    }

    fn moments(&self) -> Moments {
        Moments {
            psi: self.psi,
            psi_dot: self.psi_dot,
            psi_ddot: self.psi_ddot,
        }
    }
}

fn check_domain(spec: &StatisticSpec, theta: f64) -> Result<()> {
    let theta_max = spec.theta_max();
    if !(theta >= 0.0 && theta < theta_max) {
        return Err(Error::TiltOutOfDomain { theta, theta_max });
    }
    Ok(())
}

/// Half-width of the `z` range so that the tilted Gaussian envelope
/// `exp(-(1 - 2 a theta) z^2 / 2)` has decayed by `exp(-TAIL_EXPONENT)`.
fn half_width(spec: &StatisticSpec, theta: f64) -> f64 {
    let decay = 1.0 - 2.0 * spec.growth() * theta;
    (2.0 * TAIL_EXPONENT / decay).sqrt().max(MIN_HALF_WIDTH)
}

/// `[E e^{theta g}, E g e^{theta g}, E g^2 e^{theta g}, E g'^2 e^{theta g}]`
/// under the standard normal.
fn tilted_integrals(spec: &StatisticSpec, theta: f64) -> [f64; 4] {
    let f = |z: f64| {
        let g = spec.g(z);
        let d = spec.g_deriv(z);
        let w = (theta * g - 0.5 * z * z).exp() * INV_SQRT_2PI;
        [w, g * w, g * g * w, d * d * w]
    };
    quadrature::integrate_even(f, half_width(spec, theta), QUAD_REL_TOL, 1e-300).values
}

/// `psi(theta)`, `psi'(theta)` and `psi''(theta)` from one quadrature pass.
pub fn psi_moments(spec: &StatisticSpec, theta: f64) -> Result<Moments> {
    Ok(TiltState::at(spec, theta)?.moments())
}

/// The null mean `E g(Z) = psi'(0)`.
pub fn null_mean(spec: &StatisticSpec) -> f64 {
    psi_moments(spec, 0.0).map(|m| m.psi_dot).unwrap_or(f64::NAN)
}

/// `mu(theta) = theta^2 / 2 * int g'(z)^2 exp(theta g(z) - psi(theta)) phi(z) dz`,
/// by its own quadrature (independent of the value cached in `tilt`).
pub fn mu_theta(spec: &StatisticSpec, tilt: &TiltState) -> Result<f64> {
    check_domain(spec, tilt.theta)?;
    let theta = tilt.theta;
    let psi = tilt.psi;
    let f = |z: f64| {
        let d = spec.g_deriv(z);
        [d * d * (theta * spec.g(z) - psi - 0.5 * z * z).exp() * INV_SQRT_2PI]
    };
    let out = quadrature::integrate_even(f, half_width(spec, theta), QUAD_REL_TOL, 1e-300);
    Ok(0.5 * theta * theta * out.values[0])
}

/// Solves `psi'(theta) = target` by safeguarded Newton iteration on
/// `(0, theta_max)`.
pub fn solve_theta(spec: &StatisticSpec, target: f64) -> Result<TiltState> {
    let origin = TiltState::at(spec, 0.0)?;
    let mean = origin.psi_dot;
    if !(target > mean) {
        return Err(Error::TargetBelowMean { target, mean });
    }
    let cap = spec.theta_max() * THETA_CAP;
    let unreachable = || -> Result<TiltState> {
        let top = TiltState::at(spec, cap)?;
        if top.psi_dot < target {
            Err(Error::TargetUnreachable {
                target,
                sup: top.psi_dot,
            })
        } else {
            Ok(top)
        }
    };

    // The upper end is only evaluated if the iterate gets pushed against it:
    // quadrature next to the wall is by far the most expensive step.
    let (mut lo, mut hi) = (0.0_f64, cap);
    let mut theta = ((target - mean) / origin.psi_ddot).clamp(0.0, 0.5 * cap);
    if theta <= 0.0 {
        theta = 0.5 * cap;
    }
    let mut state = TiltState::at(spec, theta)?;
    for _ in 0..200 {
        let f = state.psi_dot - target;
        if f.abs() <= 1e-13 * target.abs() {
            return Ok(state);
        }
        if f < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        if (hi - lo) <= 1e-15 * cap {
            return if f < 0.0 && hi == cap { unreachable() } else { Ok(state) };
        }
        let newton = theta - f / state.psi_ddot;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == theta {
            return Ok(state);
        }
        theta = next;
        state = TiltState::at(spec, theta)?;
    }
    if state.psi_dot < target && hi == cap {
        return unreachable();
    }
    Ok(state)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Overshoot correction
/// `nu(x) ~ (2/x)(Phi(x/2) - 1/2) / ((x/2) Phi(x/2) + phi(x/2))`,
/// extended continuously by `nu(0) = 1`.
pub fn nu(x: f64) -> f64 {
    if x <= 1e-8 {
        return 1.0;
    }
    let half = 0.5 * x;
    // Phi(x/2) - 1/2 via erf keeps precision for small x
    let num = (2.0 / x) * 0.5 * erf(half / SQRT_2);
    num / (half * std_normal_cdf(half) + std_normal_pdf(half))
}

/// Which evaluation of the tail approximation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailForm {
    /// Term-by-term sum over window lengths, valid down to `t0 = 1`.
    #[default]
    Sum,
    /// Integral over relative window length; faster for long windows.
    Integral,
}

impl std::str::FromStr for TailForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(TailForm::Sum),
            "integral" => Ok(TailForm::Integral),
            other => Err(Error::InvalidConfig(format!("unknown tail form '{other}'"))),
        }
    }
}

/// A tail probability. `raw` is the formula's value; `value` is clamped to
/// `[0, 1]` and `clamped` records whether that changed anything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl PValue {
    fn from_raw(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        Self {
            value,
            raw,
            clamped: value != raw,
        }
    }
}

/// Log of the tau-independent factor
/// `exp(-N[theta psi' - psi]) (2 pi N psi'')^{-1/2} theta^{-1} mu^2`.
fn log_prefactor(tilt: &TiltState, n: f64) -> f64 {
    -n * (tilt.theta * tilt.psi_dot - tilt.psi)
        - 0.5 * (2.0 * std::f64::consts::PI * n * tilt.psi_ddot).ln()
        - tilt.theta.ln()
        + 2.0 * tilt.mu_theta.ln()
}

pub fn pvalue_sum_form(spec: &StatisticSpec, geom: &ScanGeometry, x: f64) -> Result<PValue> {
    let n = geom.n_samples as f64;
    let tilt = solve_theta(spec, x / n)?;
    let big_t = geom.n_probes as f64;
    let sum: f64 = (geom.t0..=geom.t1)
        .map(|tau| {
            let tau = tau as f64;
            let ratio = n / tau;
            let v = nu((2.0 * tilt.mu_theta * ratio).sqrt());
            (big_t - tau) * ratio * ratio * v * v
        })
        .sum();
    Ok(PValue::from_raw((log_prefactor(&tilt, n) + sum.ln()).exp()))
}

pub fn pvalue_integral_form(spec: &StatisticSpec, geom: &ScanGeometry, x: f64) -> Result<PValue> {
    if geom.t0 == geom.t1 {
        return pvalue_sum_form(spec, geom, x);
    }
    let n = geom.n_samples as f64;
    let tilt = solve_theta(spec, x / n)?;
    let big_t = geom.n_probes as f64;
    let c = 2.0 * n * tilt.mu_theta / big_t;
    // substitute t = e^u: dt / t^2 = e^{-u} du
    let f = |u: f64| {
        let t = u.exp();
        let v = nu((c / t).sqrt());
        [v * v * (1.0 - t) / t]
    };
    let a = (geom.t0 as f64 / big_t).ln();
    let b = (geom.t1 as f64 / big_t).ln();
    let integral = quadrature::integrate(f, a, b, 1e-10, 1e-300).values[0];
    Ok(PValue::from_raw(
        (log_prefactor(&tilt, n) + 2.0 * n.ln() + integral.ln()).exp(),
    ))
}

pub fn pvalue(spec: &StatisticSpec, geom: &ScanGeometry, x: f64, form: TailForm) -> Result<PValue> {
    match form {
        TailForm::Sum => pvalue_sum_form(spec, geom, x),
        TailForm::Integral => pvalue_integral_form(spec, geom, x),
    }
}

/// P-value of an observed scan maximum; scores at or below the null mean
/// get `1`.
pub fn scan_pvalue(spec: &StatisticSpec, geom: &ScanGeometry, x: f64, form: TailForm) -> Result<PValue> {
    match pvalue(spec, geom, x, form) {
        Err(Error::TargetBelowMean { .. }) => Ok(PValue {
            value: 1.0,
            raw: f64::NAN,
            clamped: true,
        }),
        other => other,
    }
}

/// The level `x` whose approximate tail probability equals `alpha`.
///
/// The asymptotic formula is a tail expression; close to the null mean it
/// turns over and falls back towards zero. The search therefore brackets
/// the uppermost crossing of `alpha` before bisecting.
pub fn threshold(spec: &StatisticSpec, geom: &ScanGeometry, alpha: f64, form: TailForm) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = geom.n_samples as f64;
    let null = TiltState::at(spec, 0.0)?;
    let mean = n * null.psi_dot;
    let sd = (n * null.psi_ddot).sqrt();
    let not_bracketed = || Error::ThresholdNotBracketed { alpha };
    let raw = |x: f64| -> Result<f64> {
        match pvalue(spec, geom, x, form) {
            Ok(p) => Ok(p.raw),
            Err(Error::TargetUnreachable { .. }) => Err(not_bracketed()),
            Err(e) => Err(e),
        }
    };

    let mut excess = sd;
    let mut lo: Option<f64> = None;
    let mut hi = mean + excess;
    for _ in 0..64 {
        if raw(hi)? < alpha {
            break;
        }
        lo = Some(hi);
        excess *= 2.0;
        hi = mean + excess;
    }
    if raw(hi)? >= alpha {
        return Err(not_bracketed());
    }
    let mut lo = match lo {
        Some(lo) => lo,
        None => {
            let mut e = excess;
            let mut found = None;
            for _ in 0..64 {
                e *= 0.5;
                let x = mean + e;
                if raw(x)? >= alpha {
                    found = Some(x);
                    break;
                }
                hi = x;
            }
            found.ok_or_else(not_bracketed)?
        }
    };
    while hi - lo > 1e-10 * hi.abs() {
        let mid = 0.5 * (lo + hi);
        if raw(mid)? >= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
