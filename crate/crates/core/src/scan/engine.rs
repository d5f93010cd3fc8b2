//! Window sweep over per-sequence prefix sums.
//!
//! Prefix sums are stored column-major, `(T + 1) x N`, so that the `N`
//! window sums of one `(s, tau)` are two contiguous slices apart.

use rayon::prelude::*;

use crate::matrix::IntensityMatrix;
use crate::stats::{SequenceBaseline, StatisticSpec, WindowScore};

pub struct PrefixTable {
    n: usize,
    len: usize,
    sums: Vec<f64>,
    /// Every row sums to zero, so `(s, T]` ties exactly with `(0, s]`.
    centered: bool,
}

impl PrefixTable {
    /// Prefix sums of `(y - mean) / sd` for every row.
    pub fn standardized(data: &IntensityMatrix, baselines: &[SequenceBaseline]) -> Self {
        let n = data.n_samples();
        let len = data.n_probes();
        let mut sums = vec![0.0; (len + 1) * n];
        for (i, (row, b)) in data.rows().zip(baselines).enumerate() {
            let mut acc = 0.0;
            for (t, y) in row.iter().enumerate() {
                acc += (y - b.mean) / b.sd;
                sums[(t + 1) * n + i] = acc;
            }
        }
        Self { n, len, sums, centered: false }
    }

    /// Prefix sums of the raw rows of a row-major `n x len` buffer.
    pub fn raw(n: usize, len: usize, values: &[f64]) -> Self {
        let mut sums = vec![0.0; (len + 1) * n];
        for (i, row) in values.chunks_exact(len).enumerate() {
            let mut acc = 0.0;
            for (t, y) in row.iter().enumerate() {
                acc += y;
                sums[(t + 1) * n + i] = acc;
            }
        }
        Self { n, len, sums, centered: false }
    }

    /// Declares that the rows were centered at their own means. Windows
    /// ending at `T` then tie exactly with their complement starting at 0,
    /// and are skipped when that complement is admissible so the tie-break
    /// does not depend on rounding.
    pub fn with_centered_rows(mut self) -> Self {
        self.centered = true;
        self
    }

    fn at(&self, t: usize) -> &[f64] {
        &self.sums[t * self.n..(t + 1) * self.n]
    }

    /// `sum_i g((P[s + tau] - P[s]) / scale)`.
    #[inline]
    pub fn score(&self, spec: &StatisticSpec, s: usize, tau: usize, scale: f64) -> f64 {
        let inv = 1.0 / scale;
        self.at(s)
            .iter()
            .zip(self.at(s + tau))
            .map(|(a, b)| spec.g((b - a) * inv))
            .sum()
    }

    fn best_for_length(&self, spec: &StatisticSpec, tau: usize, lengths: (usize, usize), scale: f64) -> WindowScore {
        let mut best = WindowScore {
            s: 0,
            tau,
            value: f64::NEG_INFINITY,
        };
        let complement = self.len - tau;
        let last = if self.centered && complement >= lengths.0 && complement <= lengths.1 {
            complement - 1
        } else {
            complement
        };
        for s in 0..=last {
            let value = self.score(spec, s, tau, scale);
            if value > best.value {
                best = WindowScore { s, tau, value };
            }
        }
        best
    }

    /// Maximum over `t0 <= tau <= t1`, `0 <= s <= T - tau` of the pooled
    /// score, with window sums divided by `scale(tau)`. The reduction uses
    /// the total order of [`WindowScore::better`], so the result does not
    /// depend on how lengths are split across threads.
    pub fn best_window<F>(&self, spec: &StatisticSpec, t0: usize, t1: usize, scale: F) -> WindowScore
    where
        F: Fn(usize) -> f64 + Sync,
    {
        (t0..=t1)
            .into_par_iter()
            .map(|tau| self.best_for_length(spec, tau, (t0, t1), scale(tau)))
            .reduce_with(WindowScore::better)
            .expect("non-empty length range")
    }

    /// Serial variant used inside already-parallel Monte Carlo loops.
    pub fn best_window_serial<F>(&self, spec: &StatisticSpec, t0: usize, t1: usize, scale: F) -> WindowScore
    where
        F: Fn(usize) -> f64,
    {
        (t0..=t1)
            .map(|tau| self.best_for_length(spec, tau, (t0, t1), scale(tau)))
            .reduce(WindowScore::better)
            .expect("non-empty length range")
    }
}

/// Standard deviation of an unstandardized window sum relative to the
/// sequence mean, `sqrt(tau (1 - tau / T))`.
pub fn estimated_scale(len: usize) -> impl Fn(usize) -> f64 + Sync {
    move |tau| {
        let tau = tau as f64;
        (tau * (1.0 - tau / len as f64)).sqrt()
    }
}

pub fn known_scale(tau: usize) -> f64 {
    (tau as f64).sqrt()
}
