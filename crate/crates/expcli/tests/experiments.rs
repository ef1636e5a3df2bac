use endo_core::estimate::{fit_hawkes, FitOptions};
use endo_core::hawkes::{simulate_thinning, HawkesParams};
use endo_core::stats::{quantile_sorted, sorted_finite};
use endo_core::RngSpec;
use endo_expcli::config::{SweepCase, SweepConfig};
use endo_expcli::ingest::{extract_pot_events, ingest_events};
use endo_expcli::sweep::{acd_replica, run_grid_with, run_zeta_sweep_with, Band, CellSummary};
use rand::Rng;
use rand_distr::StandardNormal;

fn small() -> SweepConfig {
    SweepConfig {
        zeta_grid: vec![0.2, 0.7],
        cases: vec![SweepCase::BetaZero, SweepCase::Beta3Alpha],
        replicas: 4,
        events: 900,
        burn_in: 200,
        bias_table: None,
        ..Default::default()
    }
}

fn normal_series(n: usize, stream: u64) -> Vec<f64> {
    let mut g = RngSpec::new(77, stream).generator();
    (0..n).map(|_| g.sample::<f64, _>(StandardNormal)).collect()
}

#[test]
fn sweep_replica_reruns_in_isolation() {
    let cfg = small();
    let result = run_zeta_sweep_with(&cfg, None).unwrap();
    assert_eq!(result.cells.len(), 4);
    assert_eq!(result.replicas.len(), 16);
    // Case beta_3alpha is index 4 of the case list, ζ = 0.7 is grid index 1.
    let rec = result.replicas.iter().find(|r| r.label == "beta_3alpha" && r.replica == 2 && r.alpha > 0.1).unwrap();
    let (alpha, beta) = SweepCase::Beta3Alpha.split(0.7);
    let alone = acd_replica(
        "beta_3alpha",
        alpha,
        beta,
        2,
        RngSpec::for_cell(cfg.seed, 4, 1, 2),
        cfg.events,
        cfg.burn_in,
        &cfg.fit,
        None,
    );
    assert_eq!(rec, &alone);
}

#[test]
fn aggregates_ignore_replica_order() {
    let result = run_zeta_sweep_with(&small(), None).unwrap();
    let recs: Vec<_> = result.replicas.iter().filter(|r| r.label == "beta_zero" && r.alpha > 0.5).cloned().collect();
    let mut reversed = recs.clone();
    reversed.reverse();
    let a = CellSummary::from_replicas("beta_zero", 0.7, 0.0, &recs);
    let b = CellSummary::from_replicas("beta_zero", 0.7, 0.0, &reversed);
    assert_eq!(a, b);
    for band in [a.mu, a.eta, a.tau, a.p_value] {
        let q = [band.q025, band.q05, band.q25, band.q50, band.q75, band.q95, band.q975];
        assert!(q.windows(2).all(|w| w[0] <= w[1]), "{band:?}");
    }
    assert_eq!(a.n_ok + a.n_failed, 4);
}

#[test]
fn grid_skips_infeasible_cells() {
    let cfg = SweepConfig { replicas: 2, ..small() };
    let g = run_grid_with(&[0.0, 0.5, 0.8], &[0.0, 0.5], &cfg, None).unwrap();
    let cells: Vec<(f64, f64)> = g.cells.iter().map(|c| (c.alpha, c.beta)).collect();
    assert_eq!(cells, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5), (0.8, 0.0)]);
}

#[test]
fn parallel_and_serial_sweeps_agree() {
    let cfg = small();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_zeta_sweep_with(&cfg, None).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_zeta_sweep_with(&cfg, None).unwrap());
    assert_eq!(serial, parallel);
}

#[test]
fn json_ingestion_round_trip() {
    let params = HawkesParams::exponential(1.0, 0.5, 1.0).unwrap();
    let ev = simulate_thinning(&params, 500, RngSpec::new(3, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.json");
    std::fs::write(&path, ev.to_json().unwrap()).unwrap();
    assert_eq!(ingest_events(&path, None).unwrap(), ev);
    let csv = dir.path().join("events.csv");
    std::fs::write(&csv, ev.to_csv()).unwrap();
    assert_eq!(ingest_events(&csv, None).unwrap().times(), ev.times());
}

#[test]
fn pot_event_fraction() {
    let v = normal_series(10_000, 0);
    let ev = extract_pot_events(&v, 0.1, 0.9).unwrap();
    let fraction = ev.len() as f64 / v.len() as f64;
    assert!((fraction - 0.2).abs() <= 0.02, "{fraction}");
    assert_eq!(ev.horizon(), 10_000.0);
    assert!(ev.times().iter().all(|t| t.fract() == 0.0 && *t >= 1.0));
}

#[test]
fn pot_rejects_bad_quantiles() {
    let v = normal_series(500, 1);
    assert!(extract_pot_events(&v, 0.0, 1.0).is_err());
    assert!(extract_pot_events(&v, 0.5, 0.5).is_err());
}

/// Event selection alone must not manufacture self-excitation.
#[test]
fn pot_on_noise_has_small_branching_ratio() {
    let etas: Vec<f64> = (0..20)
        .map(|r| {
            let ev = extract_pot_events(&normal_series(10_000, 100 + r), 0.1, 0.9).unwrap();
            assert!((1900..=2100).contains(&ev.len()));
            fit_hawkes(&ev, &FitOptions::default()).unwrap().params.eta()
        })
        .collect();
    let median = quantile_sorted(&sorted_finite(&etas), 0.5);
    assert!(median <= 0.1, "median eta {median}: {etas:?}");
}

#[test]
fn band_of_known_values() {
    let b = Band::of(&(1..=101).map(f64::from).collect::<Vec<_>>());
    assert_eq!(b.mean, 51.0);
    assert_eq!(b.q50, 51.0);
    assert_eq!(b.q05, 6.0);
    assert_eq!(b.q95, 96.0);
}
