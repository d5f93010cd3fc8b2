//! Normalization of raw intensities into approximately iid standard
//! normal residuals:
//!
//! 1. subtract each sample's median,
//! 2. remove the best rank-one approximation (the dominant artifact),
//! 3. divide each probe by half its 84%-16% quantile spread across samples.

use std::io::Write;
use std::ops::Range;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::matrix::IntensityMatrix;
use crate::order;

pub const DEFAULT_SCALE_FLOOR: f64 = 1e-6;
pub const ACF_MAX_LAG: usize = 50;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub per_sample_medians: Vec<f64>,
    pub leading_singular_value: f64,
    /// First over second singular value of the centered matrix.
    pub singular_value_ratio: f64,
    /// Per-probe scale `d_t`; flagged probes keep their raw spread here.
    pub probe_scale: Vec<f64>,
    pub flagged_probes: Vec<usize>,
}

/// The removed rank-one term `sigma u v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadingComponent {
    pub sigma: f64,
    /// Unit vector over samples.
    pub u: Vec<f64>,
    /// Unit vector over probes.
    pub v: Vec<f64>,
}

pub fn median_center(x: &IntensityMatrix) -> (IntensityMatrix, Vec<f64>) {
    let medians: Vec<f64> = x.rows().map(order::median).collect();
    let values = x
        .rows()
        .zip(&medians)
        .flat_map(|(row, m)| row.iter().map(move |y| y - m))
        .collect();
    (x.replace_values(values), medians)
}

/// Leading eigenpair of a symmetric positive semidefinite `k x k` matrix by
/// power iteration. Returns `(eigenvalue, unit vector, converged)`.
fn leading_eigenpair(gram: &[f64], k: usize) -> (f64, Vec<f64>, bool) {
    let matvec = |x: &[f64], out: &mut [f64]| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = gram[r * k..(r + 1) * k].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    };
    // start from the direction of the largest diagonal entry plus a uniform
    // component, which is never orthogonal to a nonzero leading vector of a
    // PSD matrix with that dominant diagonal
    let top = (0..k)
        .max_by(|&a, &b| gram[a * k + a].total_cmp(&gram[b * k + b]))
        .unwrap_or(0);
    let mut x = vec![1.0 / k as f64; k];
    x[top] += 1.0;
    normalize(&mut x);
    let mut y = vec![0.0; k];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        matvec(&x, &mut y);
        let norm = normalize(&mut y);
        if norm == 0.0 {
            return (0.0, x, true);
        }
        let delta = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let prev = lambda;
        lambda = norm;
        std::mem::swap(&mut x, &mut y);
        if delta < POWER_TOL {
            return (lambda, x, true);
        }
        // Nearly tied leading eigenvalues: the vector wanders inside the
        // eigenspace but the eigenvalue, and hence the residual norm, is settled.
        if (lambda - prev).abs() <= 1e-15 * lambda && delta < 1e-6 {
            return (lambda, x, true);
        }
    }
    (lambda, x, false)
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// Gram matrix over the smaller side of `x`: `X X^T` if `N <= T`, else `X^T X`.
fn gram(x: &IntensityMatrix) -> (Vec<f64>, usize, bool) {
    let (n, t) = (x.n_samples(), x.n_probes());
    if n <= t {
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v: f64 = x.row(a).iter().zip(x.row(b)).map(|(p, q)| p * q).sum();
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        (g, n, true)
    } else {
        let mut g = vec![0.0; t * t];
        for row in x.rows() {
            for a in 0..t {
                let ra = row[a];
                for b in a..t {
                    g[a * t + b] += ra * row[b];
                }
            }
        }
        for a in 0..t {
            for b in 0..a {
                g[a * t + b] = g[b * t + a];
            }
        }
        (g, t, false)
    }
}

fn best_rank1(x: &IntensityMatrix) -> Result<(LeadingComponent, f64)> {
    let (n, t) = (x.n_samples(), x.n_probes());
    let (mut g, k, sample_side) = gram(x);
    let (lambda, w, converged) = leading_eigenpair(&g, k);
    if !converged {
        return Err(Error::ConvergenceFailure {
            iterations: POWER_MAX_ITER,
        });
    }
    let sigma = lambda.sqrt();
    // project back to get the partner vector and a consistent sigma
    let (u, v, sigma) = if sigma == 0.0 {
        (vec![0.0; n], vec![0.0; t], 0.0)
    } else if sample_side {
        let mut v = vec![0.0; t];
        for (row, ui) in x.rows().zip(&w) {
            for (vt, y) in v.iter_mut().zip(row) {
                *vt += ui * y;
            }
        }
        let s = normalize(&mut v);
        (w, v, s)
    } else {
        let mut u: Vec<f64> = x.rows().map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
        let s = normalize(&mut u);
        (u, w, s)
    };

    // second singular value from the deflated Gram matrix
    for a in 0..k {
        for b in 0..k {
            g[a * k + b] -= lambda * {
                let (p, q) = if sample_side { (&u, &u) } else { (&v, &v) };
                p[a] * q[b]
            };
        }
    }
    let (lambda2, _, _) = leading_eigenpair(&g, k);
    let sigma2 = lambda2.max(0.0).sqrt();
    Ok((LeadingComponent { sigma, u, v }, sigma2))
}

/// Subtracts the best rank-one approximation. Requires `N >= 2`.
pub fn remove_rank1(x: &IntensityMatrix) -> Result<(IntensityMatrix, LeadingComponent)> {
    let (residual, lead, _) = remove_rank1_with_ratio(x)?;
    Ok((residual, lead))
}

fn remove_rank1_with_ratio(x: &IntensityMatrix) -> Result<(IntensityMatrix, LeadingComponent, f64)> {
    if x.n_samples() < 2 {
        return Err(Error::InvalidMatrix("rank-one removal needs at least 2 samples".into()));
    }
    let (lead, sigma2) = best_rank1(x)?;
    let values = x
        .rows()
        .zip(&lead.u)
        .flat_map(|(row, ui)| {
            let scale = lead.sigma * ui;
            row.iter().zip(&lead.v).map(move |(y, vt)| y - scale * vt)
        })
        .collect();
    Ok((x.replace_values(values), lead, sigma2))
}

/// Divides each probe column by `d_t = (q84 - q16) / 2`. Probes with
/// `d_t < scale_floor` are left unscaled and reported as flagged.
pub fn probe_standardize(x: &IntensityMatrix, scale_floor: f64) -> (IntensityMatrix, Vec<f64>, Vec<usize>) {
    let (n, t) = (x.n_samples(), x.n_probes());
    let mut scale = Vec::with_capacity(t);
    let mut flagged = Vec::new();
    let mut divisor = Vec::with_capacity(t);
    for j in 0..t {
        let d = order::quantile_spread(&x.column(j));
        scale.push(d);
        if d < scale_floor {
            flagged.push(j);
            divisor.push(1.0);
        } else {
            divisor.push(d);
        }
    }
    let mut values = x.values().to_vec();
    for i in 0..n {
        for j in 0..t {
            values[i * t + j] /= divisor[j];
        }
    }
    (x.replace_values(values), scale, flagged)
}

/// Runs all three steps.
pub fn preprocess(x: &IntensityMatrix, scale_floor: f64) -> Result<(IntensityMatrix, PreprocessReport)> {
    let (centered, medians) = median_center(x);
    let (residual, lead, sigma2) = remove_rank1_with_ratio(&centered)?;
    let (y, probe_scale, flagged_probes) = probe_standardize(&residual, scale_floor);
    let ratio = if sigma2 > 0.0 { lead.sigma / sigma2 } else { f64::INFINITY };
    Ok((
        y,
        PreprocessReport {
            per_sample_medians: medians,
            leading_singular_value: lead.sigma,
            singular_value_ratio: ratio,
            probe_scale,
            flagged_probes,
        },
    ))
}

/// One point of a normal QQ plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub sample: usize,
    pub qq: Vec<QqPoint>,
    pub region: Option<Range<usize>>,
    pub qq_region: Option<Vec<QqPoint>>,
    /// Autocorrelations at lags `1..=acf.len()`.
    pub acf: Vec<f64>,
}

/// Sorted values against normal quantiles at plotting positions `(k + 1/2) / n`.
pub fn qq_points(values: &[f64]) -> Vec<QqPoint> {
    let std = Normal::standard();
    let n = values.len() as f64;
    order::sorted(values)
        .into_iter()
        .enumerate()
        .map(|(k, sample)| QqPoint {
            theoretical: std.inverse_cdf((k as f64 + 0.5) / n),
            sample,
        })
        .collect()
}

pub fn autocorrelation(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    (1..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            let num: f64 = centered.iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
            if denom > 0.0 {
                num / denom
            } else {
                0.0
            }
        })
        .collect()
}

pub fn diagnostics(y: &IntensityMatrix, sample: usize, region: Option<Range<usize>>) -> Result<Diagnostics> {
    if sample >= y.n_samples() {
        return Err(Error::InvalidConfig(format!(
            "sample index {sample} out of range (N = {})",
            y.n_samples()
        )));
    }
    let row = y.row(sample);
    let qq_region = match &region {
        Some(r) if r.start < r.end && r.end <= row.len() => Some(qq_points(&row[r.clone()])),
        Some(r) => {
            return Err(Error::InvalidConfig(format!(
                "region {}..{} outside 0..{}",
                r.start,
                r.end,
                row.len()
            )))
        }
        None => None,
    };
    Ok(Diagnostics {
        sample,
        qq: qq_points(row),
        region,
        qq_region,
        acf: autocorrelation(row, ACF_MAX_LAG),
    })
}

/// Least-squares slope of sample on theoretical quantiles, restricted to
/// plotting positions in `[lo, hi]`.
pub fn qq_slope(points: &[QqPoint], lo: f64, hi: f64) -> f64 {
    let n = points.len() as f64;
    let kept: Vec<&QqPoint> = points
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let p = (*k as f64 + 0.5) / n;
            p >= lo && p <= hi
        })
        .map(|(_, q)| q)
        .collect();
    let m = kept.len() as f64;
    let mx = kept.iter().map(|q| q.theoretical).sum::<f64>() / m;
    let my = kept.iter().map(|q| q.sample).sum::<f64>() / m;
    let sxy: f64 = kept.iter().map(|q| (q.theoretical - mx) * (q.sample - my)).sum();
    let sxx: f64 = kept.iter().map(|q| (q.theoretical - mx).powi(2)).sum();
    sxy / sxx
}

pub fn write_qq_table<W: Write>(mut w: W, points: &[QqPoint]) -> std::io::Result<()> {
    writeln!(w, "theoretical\tsample")?;
    for p in points {
        writeln!(w, "{}\t{}", p.theoretical, p.sample)?;
    }
    Ok(())
}

pub fn write_acf_table<W: Write>(mut w: W, acf: &[f64]) -> std::io::Result<()> {
    writeln!(w, "lag\tacf")?;
    for (k, r) in acf.iter().enumerate() {
        writeln!(w, "{}\t{}", k + 1, r)?;
    }
    Ok(())
}

pub fn write_scale_table<W: Write>(mut w: W, report: &PreprocessReport) -> std::io::Result<()> {
    writeln!(w, "probe\tscale\tflagged")?;
    let mut flagged = report.flagged_probes.iter().peekable();
    for (j, d) in report.probe_scale.iter().enumerate() {
        let f = flagged.next_if(|&&k| k == j).is_some();
        writeln!(w, "{j}\t{d}\t{}", u8::from(f))?;
    }
    Ok(())
}
