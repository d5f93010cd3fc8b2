//! Multi-sample scan: the maximizing window, iterated detection, carrier
//! calls and replicate/trio consistency.

pub mod consistency;
pub(crate) mod engine;

pub use consistency::{consistency_report, per_sample_calls, ConsistencyCounts, Interval, OverlapRule, Pedigree, Trio};

use crate::error::{Error, Result};
use crate::matrix::IntensityMatrix;
use crate::order;
use crate::significance::{scan_pvalue, ScanGeometry, TailForm};
use crate::stats::{estimate_baselines, window_u, EstimationMode, StatisticSpec, WindowScore};
use engine::{estimated_scale, PrefixTable};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Shortest window length.
    pub t0: usize,
    /// Longest window length.
    pub t1: usize,
    pub spec: StatisticSpec,
    pub alpha: f64,
    pub max_intervals: usize,
    /// Minimum inside-vs-outside median gap for a sample to be a carrier.
    pub carrier_delta_min: f64,
    pub estimation_mode: EstimationMode,
    pub tail_form: TailForm,
}

impl ScanConfig {
    pub fn new(t0: usize, t1: usize, spec: StatisticSpec) -> Self {
        Self {
            t0,
            t1,
            spec,
            alpha: 0.05,
            max_intervals: 10,
            carrier_delta_min: 0.3,
            estimation_mode: EstimationMode::Mle,
            tail_form: TailForm::Sum,
        }
    }

    pub fn validate(&self, n_probes: usize) -> Result<()> {
        if self.t0 == 0 || self.t0 > self.t1 || self.t1 >= n_probes {
            return Err(Error::InvalidConfig(format!(
                "window lengths must satisfy 1 <= t0 <= t1 < T (t0={}, t1={}, T={n_probes})",
                self.t0, self.t1
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_intervals == 0 {
            return Err(Error::InvalidConfig("max_intervals must be at least 1".into()));
        }
        if !(self.carrier_delta_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "carrier_delta_min must be positive, got {}",
                self.carrier_delta_min
            )));
        }
        Ok(())
    }

    pub fn geometry(&self, data: &IntensityMatrix) -> Result<ScanGeometry> {
        ScanGeometry::new(data.n_samples(), data.n_probes(), self.t0, self.t1)
    }
}

/// A detected interval `(tau1, tau2]` (0-based probe offsets, so the probes
/// covered are indices `tau1..tau2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub tau1: usize,
    pub tau2: usize,
    pub score: f64,
    pub p_value: f64,
    /// Sorted sample indices.
    pub carriers: Vec<usize>,
    pub per_sample_u: Vec<f64>,
}

impl Detection {
    pub fn interval(&self) -> Interval {
        Interval::new(self.tau1, self.tau2)
    }
}

/// The window maximizing the pooled score of standardized window sums.
pub fn scan_max(data: &IntensityMatrix, config: &ScanConfig) -> Result<WindowScore> {
    config.validate(data.n_probes())?;
    let baselines = estimate_baselines(data, config.estimation_mode)?;
    let mut table = PrefixTable::standardized(data, &baselines);
    if config.estimation_mode == EstimationMode::Mle {
        table = table.with_centered_rows();
    }
    Ok(table.best_window(
        &config.spec,
        config.t0,
        config.t1,
        estimated_scale(data.n_probes()),
    ))
}

/// Samples whose median inside `(tau1, tau2]` differs from their median
/// outside by at least `delta_min`.
pub fn call_carriers(data: &IntensityMatrix, tau1: usize, tau2: usize, delta_min: f64) -> Vec<usize> {
    data.rows()
        .enumerate()
        .filter(|(_, row)| median_gap(row, tau1, tau2).abs() >= delta_min)
        .map(|(i, _)| i)
        .collect()
}

/// `median(inside) - median(outside)`.
pub fn median_gap(row: &[f64], tau1: usize, tau2: usize) -> f64 {
    let inside = &row[tau1..tau2];
    let outside: Vec<f64> = row[..tau1].iter().chain(&row[tau2..]).copied().collect();
    order::median(inside) - order::median(&outside)
}

fn mean_gap(row: &[f64], tau1: usize, tau2: usize) -> f64 {
    let inside = &row[tau1..tau2];
    let outside_len = (row.len() - inside.len()) as f64;
    let outside_sum: f64 = row[..tau1].iter().chain(&row[tau2..]).sum();
    inside.iter().sum::<f64>() / inside.len() as f64 - outside_sum / outside_len
}

/// Greedy detect-subtract-rescan.
///
/// Each round takes the scan maximum and accepts it if its approximate
/// p-value is at most `alpha`. Each carrier then has its fitted shift
/// (inside median minus outside median) removed from the interval before
/// the next round. When no sample passes the carrier threshold the mean
/// shift of every row is removed instead, so the same window cannot win
/// again. Output is sorted by position.
pub fn detect(data: &IntensityMatrix, config: &ScanConfig) -> Result<Vec<Detection>> {
    config.validate(data.n_probes())?;
    let geom = config.geometry(data)?;
    let mut working = data.clone();
    let mut found = Vec::new();
    while found.len() < config.max_intervals {
        let best = scan_max(&working, config)?;
        let p = scan_pvalue(&config.spec, &geom, best.value, config.tail_form)?;
        if p.value > config.alpha {
            break;
        }
        let (tau1, tau2) = (best.s, best.end());
        let baselines = estimate_baselines(&working, config.estimation_mode)?;
        let per_sample_u = working
            .rows()
            .zip(&baselines)
            .map(|(row, b)| window_u(row, b, tau1, tau2))
            .collect::<Result<Vec<_>>>()?;
        let carriers = call_carriers(&working, tau1, tau2, config.carrier_delta_min);

        if carriers.is_empty() {
            for i in 0..working.n_samples() {
                let row = working.row_mut(i);
                let shift = mean_gap(row, tau1, tau2);
                row[tau1..tau2].iter_mut().for_each(|y| *y -= shift);
            }
        } else {
            for &i in &carriers {
                let row = working.row_mut(i);
                let shift = median_gap(row, tau1, tau2);
                row[tau1..tau2].iter_mut().for_each(|y| *y -= shift);
            }
        }

        found.push(Detection {
            tau1,
            tau2,
            score: best.value,
            p_value: p.value,
            carriers,
            per_sample_u,
        });
    }
    found.sort_by_key(|d| (d.tau1, d.tau2));
    Ok(found)
}
