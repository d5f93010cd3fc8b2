use proptest::prelude::*;
use simscan::significance::{nu, psi_moments, pvalue_integral_form, pvalue_sum_form, solve_theta};
use simscan::{pvalue, threshold, ScanGeometry, StatisticSpec, TailForm};

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson on unit panels, so no panel starts with all three nodes
/// at zeros of the integrand.
fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let panels = (b - a).ceil() as usize;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 50)
        })
        .sum()
}

#[test]
fn tilted_moments_match_adaptive_simpson() {
    let spec = StatisticSpec::mixture(0.1).unwrap();
    let theta = 0.5;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let w = |z: f64| (theta * spec.g(z)).exp() * phi(z);
    let m0 = adaptive(w, -40.0, 40.0, 1e-14);
    let m1 = adaptive(|z| spec.g(z) * w(z), -40.0, 40.0, 1e-14) / m0;
    let m2 = adaptive(|z| spec.g(z).powi(2) * w(z), -40.0, 40.0, 1e-14) / m0;
    let got = psi_moments(&spec, theta).unwrap();
    assert!((got.psi - m0.ln()).abs() <= 1e-8 * m0.ln().abs());
    assert!((got.psi_dot - m1).abs() <= 1e-8 * m1);
    assert!((got.psi_ddot - (m2 - m1 * m1)).abs() <= 1e-8 * (m2 - m1 * m1));
}

#[test]
fn sum_chi_sq_moments_are_closed_form() {
    // z^2 tilted by theta is scaled chi-square: psi = -log(1 - 2 theta) / 2
    let spec = StatisticSpec::sum_chi_sq();
    for theta in [0.05, 0.2, 0.4, 0.45] {
        let m = psi_moments(&spec, theta).unwrap();
        let d = 1.0 - 2.0 * theta;
        assert!((m.psi + 0.5 * d.ln()).abs() < 1e-9);
        assert!((m.psi_dot - 1.0 / d).abs() < 1e-8 / d);
        assert!((m.psi_ddot - 2.0 / (d * d)).abs() < 1e-8 / (d * d));
    }
}

#[test]
fn nu_is_bounded_and_decreasing() {
    let mut prev = nu(0.0);
    assert_eq!(prev, 1.0);
    for k in 1..400 {
        let v = nu(k as f64 * 0.05);
        assert!(v > 0.0 && v < 1.0 && v < prev, "nu({}) = {v}", k as f64 * 0.05);
        prev = v;
    }
    // large-argument behaviour: nu(x) ~ 2 / x^2
    let x = 200.0;
    assert!((nu(x) * x * x / 2.0 - 1.0).abs() < 0.05);
}

#[test]
fn sum_and_integral_forms_agree() {
    for spec in [StatisticSpec::sum_chi_sq(), StatisticSpec::mixture(0.03).unwrap(), StatisticSpec::mixture(0.1).unwrap()] {
        let geom = ScanGeometry::new(100, 80_000, 1, 1000).unwrap();
        let b = threshold(&spec, &geom, 0.05, TailForm::Sum).unwrap();
        for x in [b, 1.1 * b] {
            let s = pvalue_sum_form(&spec, &geom, x).unwrap().value;
            let i = pvalue_integral_form(&spec, &geom, x).unwrap().value;
            assert!((s - i).abs() <= 0.1 * s, "{spec:?} x={x}: {s} vs {i}");
        }
    }
}

#[test]
fn threshold_inverts_pvalue() {
    let spec = StatisticSpec::mixture(0.1).unwrap();
    let geom = ScanGeometry::new(50, 5000, 1, 100).unwrap();
    let mut last = 0.0;
    for alpha in [0.1, 0.05, 0.01, 0.001] {
        let b = threshold(&spec, &geom, alpha, TailForm::Sum).unwrap();
        let p = pvalue(&spec, &geom, b, TailForm::Sum).unwrap().value;
        assert!((p - alpha).abs() <= 1e-8 * alpha);
        assert!(b > last);
        last = b;
    }
}

#[test]
fn threshold_rejects_bad_alpha() {
    let geom = ScanGeometry::new(10, 100, 1, 10).unwrap();
    assert!(threshold(&StatisticSpec::sum_chi_sq(), &geom, 0.0, TailForm::Sum).is_err());
    assert!(threshold(&StatisticSpec::sum_chi_sq(), &geom, 1.0, TailForm::Sum).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_convex(p0 in 0.01f64..1.0, theta in 0.05f64..0.8) {
        let spec = StatisticSpec::mixture(p0).unwrap();
        let h = 0.02;
        let m = psi_moments(&spec, theta).unwrap();
        let lo = psi_moments(&spec, theta - h).unwrap();
        let hi = psi_moments(&spec, theta + h).unwrap();
        prop_assert!(m.psi_ddot > 0.0);
        prop_assert!(lo.psi_dot < m.psi_dot && m.psi_dot < hi.psi_dot);
        prop_assert!(lo.psi + hi.psi - 2.0 * m.psi > 0.0);
    }

    #[test]
    fn solved_tilt_hits_target(p0 in 0.01f64..1.0, excess in 0.05f64..3.0) {
        let spec = StatisticSpec::mixture(p0).unwrap();
        let target = psi_moments(&spec, 0.0).unwrap().psi_dot + excess;
        let tilt = solve_theta(&spec, target).unwrap();
        prop_assert!((tilt.psi_dot - target).abs() <= 1e-8 * target);
        prop_assert!(tilt.theta > 0.0 && tilt.theta < spec.theta_max());
    }
}
