use std::path::Path;
use std::process::{Command, Output};

fn endo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_endo")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str = r#"{
  "zeta_grid": [0.0, 0.6],
  "cases": ["alpha_eq_beta", "alpha_zero"],
  "replicas": 3,
  "events": 900,
  "burn_in": 200,
  "bias_eta_grid": [0.0, 0.5],
  "bias_replicas": 10,
  "alpha_grid": [0.0, 0.5],
  "beta_grid": [0.0, 0.5],
  "table1_cases": [[0.38, 0.13]],
  "table1_events": 150,
  "table1_replicas": 1
}"#;

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&endo(&["--help"], d)), 0);
    assert_eq!(code(&endo(&["sweep", "--no-such-flag"], d)), 1);
    assert_eq!(code(&endo(&[], d)), 1);

    std::fs::write(d.join("unknown.json"), r#"{"replicas": 2, "extra": true}"#).unwrap();
    assert_eq!(code(&endo(&["sweep", "--config", "unknown.json"], d)), 1);
    std::fs::write(d.join("invalid.json"), r#"{"burn_in": 5000}"#).unwrap();
    assert_eq!(code(&endo(&["grid", "--config", "invalid.json"], d)), 1);
    assert_eq!(code(&endo(&["sweep", "--config", "missing.json"], d)), 1);

    std::fs::write(d.join("ties.csv"), "time\n1.0\n2.0\n2.0\n").unwrap();
    let out = endo(&["ingest", "ties.csv", "--out", "o"], d);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    assert_eq!(code(&endo(&["fit", "absent.csv", "--out", "o"], d)), 2);
    std::fs::write(d.join("const.csv"), "1\n".repeat(200)).unwrap();
    assert_eq!(code(&endo(&["pot", "const.csv", "--out", "o"], d)), 2);

    // Every realization is too short for the 50-event fitting minimum.
    std::fs::write(d.join("short.json"), r#"{"zeta_grid": [0.3], "cases": ["beta_zero"], "replicas": 2, "events": 40, "burn_in": 10, "bias_table": null}"#).unwrap();
    let out = endo(&["sweep", "--config", "short.json", "--out", "fail"], d);
    assert_eq!(code(&out), 3);
    assert!(d.join("fail/fig3_b_eta.csv").exists());
    assert!(d.join("fail/manifest.json").exists());
}

#[test]
fn simulate_fit_gof_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = endo(&["simulate", "--n", "1500", "--eta", "0.4", "--seed", "5", "--out", "sim"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit = endo(&["fit", "sim/events.json", "--out", "fit"], d);
    assert_eq!(code(&fit), 0);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("fit/fit.json")).unwrap()).unwrap();
    let eta = json["params"]["kernel"]["eta"].as_f64().unwrap();
    assert!((eta - 0.4).abs() < 0.15, "{eta}");

    std::fs::write(d.join("params.json"), r#"{"mu": 1.0, "kernel": {"family": "exponential", "eta": 0.4, "tau": 1.0}}"#).unwrap();
    assert_eq!(code(&endo(&["gof", "sim/events.csv", "--params", "params.json", "--out", "gof"], d)), 0);
    let gof: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("gof/gof.json")).unwrap()).unwrap();
    assert!(gof["gof"]["p_value"].as_f64().unwrap() > 0.0);

    let acd = endo(&["simulate", "--model", "acd", "--alpha", "0.3", "--beta", "0.3", "--n", "300", "--out", "acd"], d);
    assert_eq!(code(&acd), 0);
    assert!(std::fs::read_to_string(d.join("acd/events.csv")).unwrap().starts_with("index,time"));
}

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.json"), SMALL).unwrap();
    for run in ["a", "b"] {
        for cmd in ["sweep", "grid", "bias", "table1"] {
            let out = endo(&[cmd, "--config", "small.json", "--out", run, "--jobs", "2"], d);
            assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let expected = [
        "fig3_a_mu.csv",
        "fig3_b_eta.csv",
        "fig3_c_tau.csv",
        "fig3_d_pvalue.csv",
        "fig4_eta_corrected.csv",
        "fig5_grid.csv",
        "fig6_kernel_profile.csv",
        "fig7_a_mu.csv",
        "fig7_b_eta.csv",
        "fig7_c_tau.csv",
        "fig7_d_pvalue.csv",
        "table1.csv",
        "bias_table.csv",
        "sweep_replicas.csv",
    ];
    for name in expected {
        let a = std::fs::read(d.join("a").join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        let b = std::fs::read(d.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "table1");
    assert!(manifest["rng_algorithm"].as_str().unwrap().contains("ChaCha8"));
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["config"]["replicas"], 3);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.json"), SMALL).unwrap();
    let out = endo(&["sweep", "--config", "small.json", "--out", "s", "--seed", "9", "--scale", "0.5"], d);
    assert_eq!(code(&out), 0);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("s/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["base_seed"], 9);
    assert_eq!(manifest["config"]["scale"], 0.5);
    let eta = std::fs::read_to_string(d.join("s/fig3_b_eta.csv")).unwrap();
    // 3 replicas scaled by one half round to 2.
    assert!(eta.lines().nth(1).unwrap().ends_with(",2,0"), "{eta}");
}
