//! Order statistics shared by the baseline, carrier and normalization code.
//!
//! Quantiles use linear interpolation between order statistics: for a
//! sorted sample `x[0..n]` the `q`-quantile sits at fractional rank
//! `h = (n - 1) q`.

/// Sorts a copy of `values` with a total order (values are assumed finite).
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of an already sorted, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(values), q)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Half the distance between the 84% and 16% quantiles; equals one for a
/// standard normal population.
pub fn quantile_spread(values: &[f64]) -> f64 {
    let s = sorted(values);
    (quantile_sorted(&s, 0.84) - quantile_sorted(&s, 0.16)) / 2.0
}
