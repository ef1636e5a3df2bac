//! Experiment configuration, read from JSON with unknown keys rejected.

use std::path::{Path, PathBuf};

use endo_core::FitOptions;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// How a sweep case splits `ζ` into `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCase {
    AlphaEqBeta,
    BetaZero,
    AlphaZero,
    Alpha3Beta,
    Beta3Alpha,
}

impl SweepCase {
    pub const ALL: [SweepCase; 5] =
        [SweepCase::AlphaEqBeta, SweepCase::BetaZero, SweepCase::AlphaZero, SweepCase::Alpha3Beta, SweepCase::Beta3Alpha];

    pub fn name(self) -> &'static str {
        match self {
            SweepCase::AlphaEqBeta => "alpha_eq_beta",
            SweepCase::BetaZero => "beta_zero",
            SweepCase::AlphaZero => "alpha_zero",
            SweepCase::Alpha3Beta => "alpha_3beta",
            SweepCase::Beta3Alpha => "beta_3alpha",
        }
    }

    /// `(α, β)` with `α + β = ζ`. The larger share is computed as `ζ` minus
    /// the smaller one so the sum is exact in floating point.
    pub fn split(self, zeta: f64) -> (f64, f64) {
        match self {
            SweepCase::AlphaEqBeta => {
                let a = zeta / 2.0;
                (a, zeta - a)
            }
            SweepCase::BetaZero => (zeta, 0.0),
            SweepCase::AlphaZero => (0.0, zeta),
            SweepCase::Alpha3Beta => {
                let b = zeta / 4.0;
                (zeta - b, b)
            }
            SweepCase::Beta3Alpha => {
                let a = zeta / 4.0;
                (a, zeta - a)
            }
        }
    }

    pub fn has_alpha(self) -> bool {
        self != SweepCase::AlphaZero
    }
}

/// `n` equidistant points spanning `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub zeta_grid: Vec<f64>,
    pub cases: Vec<SweepCase>,
    pub replicas: usize,
    /// Events simulated per realization, burn-in included.
    pub events: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Cached bias table; built and written here when missing or stale.
    /// `None` disables bias correction.
    pub bias_table: Option<PathBuf>,
    /// Multiplies every replica count (bias study: never below 10).
    pub scale: f64,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub bias_eta_grid: Vec<f64>,
    pub bias_replicas: usize,
    pub bias_mu: f64,
    pub bias_tau: f64,
    /// Table-1 cases as `[α, β]`.
    pub table1_cases: Vec<[f64; 2]>,
    /// Events per Table-1 realization after the burn-in.
    pub table1_events: usize,
    pub table1_replicas: usize,
    pub fit: FitOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            zeta_grid: linspace(0.0, 1.0, 40),
            cases: SweepCase::ALL.to_vec(),
            replicas: 100,
            events: 3500,
            burn_in: 500,
            seed: 1,
            out_dir: PathBuf::from("results"),
            bias_table: Some(PathBuf::from("results/bias_table.json")),
            scale: 1.0,
            jobs: None,
            alpha_grid: linspace(0.0, 1.0, 21),
            beta_grid: linspace(0.0, 1.0, 21),
            bias_eta_grid: linspace(0.0, 0.95, 20),
            bias_replicas: 100,
            bias_mu: 1.0,
            bias_tau: 1.0,
            table1_cases: vec![[0.05, 0.05], [0.38, 0.13], [0.13, 0.38], [0.45, 0.45]],
            table1_events: 300,
            table1_replicas: 10,
            fit: FitOptions::default(),
        }
    }
}

impl SweepConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.zeta_grid.is_empty() || self.zeta_grid.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return bad("zeta_grid must be non-empty and within [0, 1]".into());
        }
        if self.cases.is_empty() {
            return bad("at least one sweep case is required".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.burn_in >= self.events {
            return bad(format!("burn_in {} must be below events {}", self.burn_in, self.events));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        for (name, g) in [("alpha_grid", &self.alpha_grid), ("beta_grid", &self.beta_grid)] {
            if g.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("{name} must lie within [0, 1]"));
            }
        }
        if self.bias_eta_grid.is_empty()
            || self.bias_eta_grid.iter().any(|e| !(0.0..1.0).contains(e))
            || self.bias_eta_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("bias_eta_grid must be strictly increasing within [0, 1)".into());
        }
        if !(self.bias_mu > 0.0 && self.bias_tau > 0.0) {
            return bad("bias_mu and bias_tau must be positive".into());
        }
        for &[a, b] in &self.table1_cases {
            if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
                return bad(format!("table1 case ({a}, {b}) violates alpha, beta >= 0 and alpha + beta <= 1"));
            }
        }
        if self.table1_events == 0 || self.table1_replicas == 0 {
            return bad("table1_events and table1_replicas must be positive".into());
        }
        self.fit.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Sweep and grid replicas after scaling.
    pub fn scaled_replicas(&self) -> usize {
        ((self.replicas as f64 * self.scale).round() as usize).max(1)
    }

    pub fn scaled_bias_replicas(&self) -> usize {
        ((self.bias_replicas as f64 * self.scale).round() as usize).max(10)
    }

    pub fn scaled_table1_replicas(&self) -> usize {
        ((self.table1_replicas as f64 * self.scale).round() as usize).max(1)
    }

    /// Events kept for fitting.
    pub fn fit_events(&self) -> usize {
        self.events - self.burn_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_are_exact() {
        for &z in &linspace(0.0, 1.0, 40) {
            for case in SweepCase::ALL {
                let (a, b) = case.split(z);
                assert_eq!(a + b, z, "{case:?} at {z}");
                assert!(a >= 0.0 && b >= 0.0);
            }
        }
        assert_eq!(SweepCase::BetaZero.split(0.3), (0.3, 0.0));
    }

    #[test]
    fn default_grid_spans_unit_interval() {
        let g = linspace(0.0, 1.0, 40);
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[39], 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(SweepConfig::from_json(r#"{"replicas": 3, "bogus": 1}"#), Err(HarnessError::Config(_))));
        let cfg = SweepConfig::from_json(r#"{"replicas": 3}"#).unwrap();
        assert_eq!(cfg.replicas, 3);
        assert_eq!(cfg.events, 3500);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(SweepConfig::from_json(r#"{"burn_in": 4000}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"zeta_grid": [0.5, 1.2]}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"table1_cases": [[0.6, 0.6]]}"#).is_err());
    }

    #[test]
    fn scale_shrinks_replicas_only() {
        let cfg = SweepConfig { scale: 0.1, ..Default::default() };
        assert_eq!(cfg.scaled_replicas(), 10);
        assert_eq!(cfg.events, 3500);
        assert_eq!(cfg.scaled_bias_replicas(), 10);
    }
}
