use proptest::prelude::*;
use simscan::scan::call_carriers;
use simscan::simulate::{
    marginal_power, marginal_power_sum_chi_sq, null_matrix, plant_signal, rep_rng, simulate_null_threshold,
    simulate_ou_chain, simulate_ou_threshold,
};
use simscan::{OuConfig, PlantSpec, PowerSetting, ScanGeometry, SignPolicy, StatisticSpec};

#[test]
fn ou_chain_has_ar1_marginals() {
    let (beta, spacing, len) = (0.04f64, 0.5f64, 1600);
    let rho: f64 = (-beta * spacing).exp();
    let seqs = 400;
    let (mut var, mut lag1) = (0.0, 0.0);
    for k in 0..seqs {
        let mut rng = rep_rng(42, k);
        let mut u = vec![0.0; len];
        simulate_ou_chain(&mut rng, rho, &mut u);
        // the process mean is known to be zero; estimating it per chain
        // would bias the variance down by about (1 + rho) / ((1 - rho) len)
        let ss: f64 = u.iter().map(|v| v * v).sum();
        var += ss / len as f64;
        lag1 += u.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / ss;
    }
    var /= seqs as f64;
    lag1 /= seqs as f64;
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
    assert!((lag1 - rho).abs() < 0.02, "lag-1 {lag1} vs {rho}");
}

#[test]
fn monte_carlo_is_seeded() {
    let spec = StatisticSpec::mixture(0.1).unwrap();
    let geom = ScanGeometry::new(10, 200, 1, 20).unwrap();
    let a = simulate_null_threshold(&spec, &geom, 0.1, 200, 5).unwrap();
    let b = simulate_null_threshold(&spec, &geom, 0.1, 200, 5).unwrap();
    let c = simulate_null_threshold(&spec, &geom, 0.1, 200, 6).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_ne!(a, c);

    let ou = OuConfig {
        n_sequences: 5,
        genome_length: 100.0,
        spacing: 1.0,
        beta: 0.04,
        p0: 0.1,
    };
    let x = simulate_ou_threshold(&ou, 0.1, 200, 9).unwrap();
    assert_eq!(x.to_bits(), simulate_ou_threshold(&ou, 0.1, 200, 9).unwrap().to_bits());
}

#[test]
fn infinite_threshold_has_zero_power() {
    let setting = PowerSetting {
        n_samples: 50,
        tau_len: 10,
        snr: 3.0,
        carrier_fraction: 0.2,
    };
    let spec = StatisticSpec::mixture(0.1).unwrap();
    assert_eq!(marginal_power(&spec, &setting, f64::INFINITY, 1000, 1).unwrap(), 0.0);
    assert_eq!(marginal_power_sum_chi_sq(&setting, f64::INFINITY).unwrap(), 0.0);
}

#[test]
fn sum_chi_sq_power_matches_monte_carlo() {
    let spec = StatisticSpec::sum_chi_sq();
    let setting = PowerSetting {
        n_samples: 40,
        tau_len: 6,
        snr: 1.0,
        carrier_fraction: 0.1,
    };
    let b = 75.0;
    let exact = marginal_power_sum_chi_sq(&setting, b).unwrap();
    let mc = marginal_power(&spec, &setting, b, 20_000, 3).unwrap();
    let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
    assert!((mc - exact).abs() < 4.0 * se, "{mc} vs {exact}");
}

#[test]
fn carrier_sets_nest_in_delta() {
    let base = null_matrix(100, 500, 3).unwrap();
    let plant = PlantSpec {
        tau1: 200,
        tau2: 220,
        carrier_fraction: 0.1,
        snr: 0.8,
        sign_policy: SignPolicy::RandomSign,
    };
    let (data, _) = plant_signal(&base, &plant, 3).unwrap();
    let sets: Vec<Vec<usize>> = [0.2, 0.3, 0.4].iter().map(|&d| call_carriers(&data, 200, 220, d)).collect();
    assert!(sets[2].iter().all(|i| sets[1].contains(i)));
    assert!(sets[1].iter().all(|i| sets[0].contains(i)));
    assert!(sets[0].len() > sets[2].len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // common random numbers make these comparisons exact, not statistical
    #[test]
    fn power_is_monotone(snr in 0.2f64..1.5, len in 2usize..12, seed in 0u64..1000) {
        let spec = StatisticSpec::mixture(0.1).unwrap();
        let at = |snr, tau_len, p| {
            let s = PowerSetting { n_samples: 60, tau_len, snr, carrier_fraction: p };
            marginal_power(&spec, &s, 25.0, 1000, seed).unwrap()
        };
        let base = at(snr, len, 0.1);
        prop_assert!(at(snr + 0.3, len, 0.1) >= base);
        prop_assert!(at(snr, len + 4, 0.1) >= base);
        prop_assert!(at(snr, len, 0.2) >= base);
    }
}
