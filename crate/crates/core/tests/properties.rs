use endo_core::acd::{acd_intensity_at, simulate_acd, AcdParams};
use endo_core::diagnostics::{aic, residual_process};
use endo_core::estimate::{conditional_log_likelihood, correct_eta, BiasCell, BiasProvenance, BiasTable};
use endo_core::hawkes::{simulate_branching, simulate_thinning, HawkesParams, Kernel, KernelFamily};
use endo_core::{durations_to_events, events_to_durations, DurationSeries, EventSeries, FitOptions, RngSpec};
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.0..0.95f64, 0.05..20.0f64).prop_map(|(eta, tau)| Kernel::exponential(eta, tau)),
        (0.0..0.95f64, 0.05..20.0f64, 1.05..30.0f64).prop_map(|(eta, c, phi)| Kernel::power_law(eta, c, phi)),
    ]
}

fn params_strategy() -> impl Strategy<Value = HawkesParams> {
    (0.05..5.0f64, kernel_strategy()).prop_map(|(mu, k)| HawkesParams::new(mu, k).unwrap())
}

fn durations_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..10.0f64, 1..max_len)
}

fn bias_table(knots: &[(f64, f64)]) -> BiasTable {
    BiasTable {
        family: KernelFamily::Exponential,
        n_events: 1000,
        replicas: 10,
        cells: knots
            .iter()
            .map(|&(eta, b)| BiasCell {
                eta,
                mean_bias: b,
                q05: b,
                q25: b,
                q50: b,
                q75: b,
                q95: b,
                used: 10,
                excluded: 0,
            })
            .collect(),
        provenance: BiasProvenance {
            crate_version: "test".into(),
            rng_algorithm: "test".into(),
            seed: 0,
            stream: 0,
            mu: 1.0,
            kernel: Kernel::exponential(0.5, 1.0),
            burn_in: 0,
            fit: FitOptions::default(),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn events_durations_round_trip(d in durations_strategy(500), start in 0.0..100.0f64) {
        let ds = DurationSeries::new(d.clone()).unwrap();
        let ev = durations_to_events(&ds, start).unwrap();
        let back = events_to_durations(&ev).unwrap().as_slice().to_vec();
        prop_assert_eq!(back.len(), d.len());
        // The first duration is measured from time 0.
        prop_assert!((back[0] - (d[0] + start)).abs() <= 1e-12 * (1.0 + start));
        for (a, b) in back.iter().zip(&d).skip(1) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + start + ev.horizon()));
        }
    }

    #[test]
    fn json_and_csv_round_trip(d in durations_strategy(200)) {
        let ev = durations_to_events(&DurationSeries::new(d).unwrap(), 0.0).unwrap();
        prop_assert_eq!(&EventSeries::from_json(&ev.to_json().unwrap()).unwrap(), &ev);
        let csv = EventSeries::from_csv(&ev.to_csv()).unwrap();
        prop_assert_eq!(csv.times(), ev.times());
    }

    #[test]
    fn simulators_are_deterministic(p in params_strategy(), seed in any::<u64>(), stream in any::<u64>()) {
        let rng = RngSpec::new(seed, stream);
        prop_assert_eq!(simulate_thinning(&p, 200, rng).ok(), simulate_thinning(&p, 200, rng).ok());
        prop_assert_eq!(simulate_branching(&p, 50.0, rng).ok(), simulate_branching(&p, 50.0, rng).ok());
        let acd = AcdParams::new(1.0, 0.3, 0.4).unwrap();
        prop_assert_eq!(simulate_acd(&acd, 200, rng).unwrap(), simulate_acd(&acd, 200, rng).unwrap());
    }

    #[test]
    fn kernel_integral_is_monotone_and_bounded(k in kernel_strategy(), s in 0.0..1e4f64, ds in 0.0..1e3f64) {
        let (a, b) = (k.integral(s), k.integral(s + ds));
        prop_assert!(a >= 0.0 && a <= b + 1e-15 && b <= k.eta() * (1.0 + 1e-12));
        prop_assert!(k.value(s) >= k.value(s + ds));
    }

    #[test]
    fn residuals_increase_and_u_is_a_probability(p in params_strategy(), d in durations_strategy(150)) {
        let ev = durations_to_events(&DurationSeries::new(d).unwrap(), 0.0).unwrap();
        let r = residual_process(&ev, &p);
        prop_assert_eq!(r.xi.len(), ev.len());
        prop_assert!(r.xi[0] > 0.0);
        prop_assert!(r.xi.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(r.u.iter().all(|&u| (0.0..=1.0).contains(&u)));
    }

    #[test]
    fn aic_is_affine(ll in -1e6..1e6f64, shift in -1e3..1e3f64, k in 1usize..10) {
        prop_assert!((aic(ll, k) - (2.0 * k as f64 - 2.0 * ll)).abs() <= 1e-9 * ll.abs().max(1.0));
        prop_assert!((aic(ll + shift, k) - (aic(ll, k) - 2.0 * shift)).abs() <= 1e-9 * ll.abs().max(1.0));
    }

    #[test]
    fn corrected_eta_stays_in_unit_interval(
        biases in prop::collection::vec(-0.3..0.3f64, 2..12),
        eta_hat in 0.0..=1.0f64,
    ) {
        let n = biases.len();
        let knots: Vec<(f64, f64)> = biases.iter().enumerate().map(|(i, &b)| (0.95 * i as f64 / (n - 1) as f64, b)).collect();
        let c = correct_eta(eta_hat, &bias_table(&knots)).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.eta));
    }

    #[test]
    fn conditional_likelihood_is_translation_invariant(p in params_strategy(), d in durations_strategy(120), shift in 0.0..1e4f64) {
        let ev = durations_to_events(&DurationSeries::new(d).unwrap(), 0.0).unwrap();
        let a = conditional_log_likelihood(&ev, &p).unwrap();
        let b = conditional_log_likelihood(&ev.shifted(shift).unwrap(), &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0) + 1e-12 * shift * ev.len() as f64, "{} vs {}", a, b);
    }

    #[test]
    fn acd_intensity_is_constant_between_events(
        alpha in 0.0..0.5f64, beta in 0.0..0.5f64, seed in any::<u64>(), frac in 0.01..0.99f64,
    ) {
        let params = AcdParams::new(1.0, alpha, beta).unwrap();
        let r = simulate_acd(&params, 50, RngSpec::new(seed, 0)).unwrap();
        prop_assert!(r.recursion_residual(&params) <= 1e-12);
        let t = r.events.times();
        for i in 1..t.len() {
            let a = acd_intensity_at(t[i - 1] + frac * (t[i] - t[i - 1]), &r, &params);
            let b = acd_intensity_at(t[i - 1] + 0.5 * (t[i] - t[i - 1]), &r, &params);
            prop_assert_eq!(a, b);
        }
    }
}
