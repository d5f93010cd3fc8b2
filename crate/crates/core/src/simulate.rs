//! Seeded Monte Carlo harnesses.
//!
//! Every repetition draws from its own ChaCha stream derived from
//! `(seed, rep)`, so results do not depend on how repetitions are spread
//! over threads.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::matrix::IntensityMatrix;
use crate::order;
use crate::scan::engine::{estimated_scale, known_scale, PrefixTable};
use crate::scan::Interval;
use crate::significance::ScanGeometry;
use crate::stats::{estimate_baselines, EstimationMode, StatisticSpec};

/// Word offset between per-row substreams; far more than any row consumes.
const ROW_STRIDE_WORDS: u128 = 1 << 40;

/// Generator for repetition `rep` of a run seeded with `seed`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn row_rng(seed: u64, rep: u64, row: usize) -> ChaCha8Rng {
    let mut rng = rep_rng(seed, rep);
    rng.set_word_pos(row as u128 * ROW_STRIDE_WORDS);
    rng
}

fn check_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(Error::InvalidConfig(format!("need at least {min} repetitions, got {reps}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Empirical `(1 - alpha)` quantile of simulated maxima.
pub fn upper_quantile(maxima: &[f64], alpha: f64) -> f64 {
    order::quantile(maxima, 1.0 - alpha)
}

/// How window scores are standardized in null simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParameterMode {
    /// Zero mean and unit variance are known: `Z = W / sqrt(tau)`.
    #[default]
    Known,
    /// Mean and variance re-estimated per row, as the production scan does.
    Estimated,
}

fn normal_fill(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// Scan maxima of `reps` iid standard-normal `N x T` matrices, one vector
/// per statistic. All statistics see the same matrices.
pub fn simulate_null_maxima(
    specs: &[StatisticSpec],
    geom: &ScanGeometry,
    reps: usize,
    seed: u64,
    mode: ParameterMode,
) -> Result<Vec<Vec<f64>>> {
    let (n, len) = (geom.n_samples, geom.n_probes);
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep as u64);
            let mut values = vec![0.0; n * len];
            normal_fill(&mut rng, &mut values);
            match mode {
                ParameterMode::Known => {
                    let table = PrefixTable::raw(n, len, &values);
                    specs
                        .iter()
                        .map(|spec| table.best_window_serial(spec, geom.t0, geom.t1, known_scale).value)
                        .collect::<Vec<_>>()
                }
                ParameterMode::Estimated => {
                    let ids = (0..n).map(|i| i.to_string()).collect();
                    let m = IntensityMatrix::from_flat(n, len, values, ids).expect("valid shape");
                    let baselines = estimate_baselines(&m, EstimationMode::Mle).expect("normal rows vary");
                    let table = PrefixTable::standardized(&m, &baselines).with_centered_rows();
                    let scale = estimated_scale(len);
                    specs
                        .iter()
                        .map(|spec| table.best_window_serial(spec, geom.t0, geom.t1, &scale).value)
                        .collect()
                }
            }
        })
        .collect();
    Ok(transpose(per_rep, specs.len()))
}

fn transpose(per_rep: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|j| per_rep.iter().map(|r| r[j]).collect()).collect()
}

/// Empirical `(1 - alpha)` quantile of the null scan maximum, with
/// known-parameter window scores.
pub fn simulate_null_threshold(
    spec: &StatisticSpec,
    geom: &ScanGeometry,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    check_reps(reps, 100)?;
    check_alpha(alpha)?;
    let maxima = simulate_null_maxima(std::slice::from_ref(spec), geom, reps, seed, ParameterMode::Known)?;
    Ok(upper_quantile(&maxima[0], alpha))
}

/// Grid of `N` independent stationary Ornstein-Uhlenbeck processes with
/// covariance `exp(-beta |t - s|)`, observed every `spacing` cM over a map
/// of `genome_length` cM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuConfig {
    pub n_sequences: usize,
    pub genome_length: f64,
    pub spacing: f64,
    pub beta: f64,
    pub p0: f64,
}

impl OuConfig {
    pub fn grid_size(&self) -> usize {
        (self.genome_length / self.spacing).floor() as usize
    }

    /// Lag-one autocorrelation on the grid.
    pub fn rho(&self) -> f64 {
        (-self.beta * self.spacing).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sequences == 0 {
            return Err(Error::InvalidConfig("need at least one sequence".into()));
        }
        if !(self.spacing > 0.0 && self.genome_length > 0.0) || self.grid_size() < 1 {
            return Err(Error::InvalidConfig("grid must contain at least one marker".into()));
        }
        let rho = self.rho();
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig(format!("autocorrelation {rho} outside (0, 1)")));
        }
        Ok(())
    }
}

/// Exact stationary AR(1) embedding of the OU process: `U_0 ~ N(0, 1)`,
/// `U_j = rho U_{j-1} + sqrt(1 - rho^2) e_j`.
pub fn simulate_ou_chain<R: Rng>(rng: &mut R, rho: f64, out: &mut [f64]) {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut u: f64 = rng.sample(StandardNormal);
    for (j, v) in out.iter_mut().enumerate() {
        if j > 0 {
            let e: f64 = rng.sample(StandardNormal);
            u = rho * u + innovation * e;
        }
        *v = u;
    }
}

/// Maxima over the grid of `sum_i g(U_i(j spacing))`, one vector per statistic.
pub fn simulate_ou_maxima(
    config: &OuConfig,
    specs: &[StatisticSpec],
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let len = config.grid_size();
    let rho = config.rho();
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep as u64);
            let mut chain = vec![0.0; len];
            let mut totals = vec![vec![0.0; len]; specs.len()];
            for _ in 0..config.n_sequences {
                simulate_ou_chain(&mut rng, rho, &mut chain);
                for (spec, acc) in specs.iter().zip(totals.iter_mut()) {
                    for (a, &u) in acc.iter_mut().zip(&chain) {
                        *a += spec.g(u);
                    }
                }
            }
            totals
                .iter()
                .map(|acc| acc.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect()
        })
        .collect();
    Ok(transpose(per_rep, specs.len()))
}

/// Empirical `(1 - alpha)` quantile of the mixture linkage statistic.
pub fn simulate_ou_threshold(config: &OuConfig, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    check_reps(reps, 100)?;
    check_alpha(alpha)?;
    let spec = StatisticSpec::mixture(config.p0)?;
    let maxima = simulate_ou_maxima(config, &[spec], reps, seed)?;
    Ok(upper_quantile(&maxima[0], alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignPolicy {
    #[default]
    AllPositive,
    RandomSign,
}

/// A shared-breakpoint variant to plant: carriers get a shift of `snr`
/// noise standard deviations on `(tau1, tau2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantSpec {
    pub tau1: usize,
    pub tau2: usize,
    pub carrier_fraction: f64,
    pub snr: f64,
    pub sign_policy: SignPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth {
    pub interval: Interval,
    /// Sorted carrier indices.
    pub carriers: Vec<usize>,
    /// Shift added to each carrier, aligned with `carriers`.
    pub shifts: Vec<f64>,
}

/// `ceil(p N)`, at least one.
pub fn carrier_count(n: usize, p: f64) -> usize {
    ((p * n as f64) - 1e-9).ceil().max(1.0).min(n as f64) as usize
}

/// Unit-variance white noise, `N x T`.
pub fn null_matrix(n: usize, len: usize, seed: u64) -> Result<IntensityMatrix> {
    let mut rng = rep_rng(seed, 0);
    let mut values = vec![0.0; n * len];
    normal_fill(&mut rng, &mut values);
    IntensityMatrix::from_flat(n, len, values, (0..n).map(|i| format!("s{i}")).collect())
}

/// Adds `±snr` to `ceil(p N)` randomly chosen rows on `(tau1, tau2]`. The
/// base data is taken to be on a unit-noise scale.
pub fn plant_signal(
    base: &IntensityMatrix,
    plant: &PlantSpec,
    seed: u64,
) -> Result<(IntensityMatrix, PlantedTruth)> {
    if plant.tau1 >= plant.tau2 || plant.tau2 > base.n_probes() {
        return Err(Error::InvalidConfig(format!(
            "interval ({}, {}] is not inside 0..{}",
            plant.tau1,
            plant.tau2,
            base.n_probes()
        )));
    }
    if !(plant.carrier_fraction > 0.0 && plant.carrier_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "carrier fraction must lie in (0, 1], got {}",
            plant.carrier_fraction
        )));
    }
    let n = base.n_samples();
    let k = carrier_count(n, plant.carrier_fraction);
    let mut rng = rep_rng(seed, 1);
    let mut carriers = index::sample(&mut rng, n, k).into_vec();
    carriers.sort_unstable();
    let shifts: Vec<f64> = carriers
        .iter()
        .map(|_| match plant.sign_policy {
            SignPolicy::AllPositive => plant.snr,
            SignPolicy::RandomSign => {
                if rng.random::<bool>() {
                    plant.snr
                } else {
                    -plant.snr
                }
            }
        })
        .collect();
    let mut data = base.clone();
    for (&i, &delta) in carriers.iter().zip(&shifts) {
        data.row_mut(i)[plant.tau1..plant.tau2]
            .iter_mut()
            .for_each(|y| *y += delta);
    }
    Ok((
        data,
        PlantedTruth {
            interval: Interval::new(plant.tau1, plant.tau2),
            carriers,
            shifts,
        },
    ))
}

/// The true window of a power calculation: `n_samples` sequences,
/// `ceil(p N)` of which carry a shift of `snr` over `tau_len` probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSetting {
    pub n_samples: usize,
    pub tau_len: usize,
    pub snr: f64,
    pub carrier_fraction: f64,
}

impl PowerSetting {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.tau_len == 0 {
            return Err(Error::InvalidConfig("need at least one sample and one probe".into()));
        }
        if !(self.carrier_fraction > 0.0 && self.carrier_fraction <= 1.0) || !(self.snr >= 0.0) {
            return Err(Error::InvalidConfig("invalid carrier fraction or snr".into()));
        }
        Ok(())
    }

    pub fn carriers(&self) -> usize {
        carrier_count(self.n_samples, self.carrier_fraction)
    }
}

/// Standardized window scores `Z_i` of one repetition. Row `i` draws from
/// its own substream, so the noise is shared across settings that differ
/// only in length, shift or carrier count.
fn window_scores(setting: &PowerSetting, seed: u64, rep: usize, out: &mut [f64]) {
    let k = setting.carriers();
    let scale = known_scale(setting.tau_len);
    for (i, z) in out.iter_mut().enumerate() {
        let mut rng = row_rng(seed, rep as u64, i);
        let delta = if i < k { setting.snr } else { 0.0 };
        let mut w = 0.0;
        for _ in 0..setting.tau_len {
            let e: f64 = rng.sample(StandardNormal);
            w += delta + e;
        }
        *z = w / scale;
    }
}

fn exceedance<F>(setting: &PowerSetting, reps: usize, seed: u64, exceeds: F) -> f64
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut z = vec![0.0; setting.n_samples];
            window_scores(setting, seed, rep, &mut z);
            usize::from(exceeds(&z))
        })
        .sum();
    hits as f64 / reps as f64
}

/// Monte Carlo estimate of `P(G(true window) > b)`, a lower bound on the
/// power of the full scan.
pub fn marginal_power(
    spec: &StatisticSpec,
    setting: &PowerSetting,
    b: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    setting.validate()?;
    check_reps(reps, 1000)?;
    if b.is_nan() {
        return Err(Error::InvalidConfig("threshold is NaN".into()));
    }
    Ok(exceedance(setting, reps, seed, |z| spec.pooled_score(z) > b))
}

/// Marginal power of Bonferroni-combined single-sequence scans: at least
/// one sequence has `Z_i^2 > b_single`.
pub fn single_sample_marginal_power(setting: &PowerSetting, b_single: f64, reps: usize, seed: u64) -> Result<f64> {
    setting.validate()?;
    check_reps(reps, 1000)?;
    Ok(exceedance(setting, reps, seed, |z| z.iter().any(|&v| v * v > b_single)))
}

/// Exact marginal power of the sum of chi-squares: the window statistic is
/// noncentral chi-square with `N` degrees of freedom and noncentrality
/// `k snr^2 tau`, evaluated as a Poisson mixture of central tails.
pub fn marginal_power_sum_chi_sq(setting: &PowerSetting, b: f64) -> Result<f64> {
    setting.validate()?;
    if b <= 0.0 {
        return Ok(1.0);
    }
    if b.is_infinite() {
        return Ok(0.0);
    }
    let half_lambda = 0.5 * setting.carriers() as f64 * setting.snr * setting.snr * setting.tau_len as f64;
    let half_df = 0.5 * setting.n_samples as f64;
    if half_lambda == 0.0 {
        return Ok(gamma_ur(half_df, 0.5 * b));
    }
    let j_max = (half_lambda + 40.0 * half_lambda.sqrt() + 50.0).ceil() as usize;
    let mut total = 0.0;
    let mut log_weight = -half_lambda;
    for j in 0..=j_max {
        if j > 0 {
            log_weight += half_lambda.ln() - (j as f64).ln();
        }
        total += log_weight.exp() * gamma_ur(half_df + j as f64, 0.5 * b);
    }
    Ok(total.clamp(0.0, 1.0))
}
