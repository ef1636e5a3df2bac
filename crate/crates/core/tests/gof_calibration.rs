//! Monte-Carlo calibration of the residual KS test.

use endo_core::diagnostics::{ks_uniform_test, residual_process};
use endo_core::hawkes::{simulate_thinning, HawkesParams};
use endo_core::RngSpec;

fn true_model_p_values(params: &HawkesParams, n_events: usize, replicas: u64, seed: u64) -> Vec<f64> {
    (0..replicas)
        .map(|r| {
            let ev = simulate_thinning(params, n_events, RngSpec::new(seed, r)).unwrap();
            ks_uniform_test(&residual_process(&ev, params).u).unwrap().p_value
        })
        .collect()
}

#[test]
fn null_p_values_are_uniform() {
    let params = HawkesParams::exponential(1.0, 0.5, 1.0).unwrap();
    let p = true_model_p_values(&params, 500, 1000, 200);
    for level in [0.01, 0.05, 0.10] {
        let rate = p.iter().filter(|&&v| v < level).count() as f64 / p.len() as f64;
        assert!((rate - level).abs() <= 0.02, "level {level}: rejection rate {rate}");
    }
}

#[test]
fn true_model_residuals_pass() {
    let params = HawkesParams::power_law(0.7, 0.6, 0.5, 2.5).unwrap();
    let p = true_model_p_values(&params, 800, 100, 201);
    let passed = p.iter().filter(|&&v| v >= 0.05).count();
    assert!(passed >= 90, "{passed} of 100");
}

#[test]
fn poisson_statistic_shrinks() {
    let n = 10_000;
    let params = HawkesParams::exponential(3.0, 0.0, 1.0).unwrap();
    let critical = 1.63 / (n as f64).sqrt();
    let within = (0..100)
        .filter(|&r| {
            let ev = simulate_thinning(&params, n, RngSpec::new(202, r)).unwrap();
            ks_uniform_test(&residual_process(&ev, &params).u).unwrap().ks_statistic <= critical
        })
        .count();
    assert!(within >= 99, "{within} of 100");
}

#[test]
fn misspecified_model_is_rejected() {
    let truth = HawkesParams::exponential(1.0, 0.7, 1.0).unwrap();
    let wrong = HawkesParams::exponential(3.33, 0.0, 1.0).unwrap();
    let ev = simulate_thinning(&truth, 3000, RngSpec::new(203, 0)).unwrap();
    assert!(ks_uniform_test(&residual_process(&ev, &wrong).u).unwrap().reject_at_5pct);
}
