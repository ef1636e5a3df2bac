//! Monte-Carlo finite-sample bias of `η̂` and its inversion.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_hawkes, FitOptions};
use crate::diagnostics::{ks_uniform_test, residual_process};
use crate::error::{Error, Result};
use crate::hawkes::{simulate_thinning, HawkesParams, Kernel, KernelFamily};
use crate::rng::{RngSpec, RNG_ALGORITHM};
use crate::stats::{mean, quantile_sorted, sorted_finite};

pub const DEFAULT_BURN_IN: usize = 500;

/// Protocol of a bias study. `kernel` fixes everything but `η`, which runs
/// over `eta_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasStudy {
    pub eta_grid: Vec<f64>,
    pub mu: f64,
    pub kernel: Kernel,
    /// Events kept for fitting, after the burn-in.
    pub n_events: usize,
    pub burn_in: usize,
    pub replicas: usize,
    pub rng: RngSpec,
    pub fit: FitOptions,
}

impl BiasStudy {
    pub fn exponential(eta_grid: Vec<f64>, mu: f64, tau: f64, n_events: usize, replicas: usize, rng: RngSpec) -> Self {
        Self {
            eta_grid,
            mu,
            kernel: Kernel::exponential(0.0, tau),
            n_events,
            burn_in: DEFAULT_BURN_IN,
            replicas,
            rng,
            fit: FitOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eta_grid.is_empty() {
            return Err(Error::param("bias grid is empty"));
        }
        if self.eta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("bias grid must be strictly increasing"));
        }
        if self.eta_grid.iter().any(|&e| !(0.0..1.0).contains(&e)) {
            return Err(Error::param("bias grid must lie in [0, 1)"));
        }
        if self.replicas < 10 {
            return Err(Error::param(format!("at least 10 replicas required, got {}", self.replicas)));
        }
        if self.eta_grid.len() >= 1 << 16 || self.rng.stream >= 1 << 16 {
            return Err(Error::param("bias grid or rng stream too large for stream packing"));
        }
        HawkesParams::new(self.mu, self.kernel)?;
        Ok(())
    }
}

/// One fitted replica of a bias study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReplica {
    pub eta_true: f64,
    pub replica: usize,
    /// `None` when the replica was excluded.
    pub estimate: Option<HawkesParams>,
    pub converged: bool,
    pub ks_p_value: Option<f64>,
    pub excluded_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCell {
    pub eta: f64,
    pub mean_bias: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProvenance {
    pub crate_version: String,
    pub rng_algorithm: String,
    pub seed: u64,
    pub stream: u64,
    pub mu: f64,
    pub kernel: Kernel,
    pub burn_in: usize,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    pub family: KernelFamily,
    pub n_events: usize,
    pub replicas: usize,
    pub cells: Vec<BiasCell>,
    pub provenance: BiasProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasStudyOutput {
    pub table: BiasTable,
    pub replicas: Vec<BiasReplica>,
}

impl BiasTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let table: BiasTable = serde_json::from_str(s)?;
        if table.cells.is_empty() {
            return Err(Error::param("bias table has no cells"));
        }
        Ok(table)
    }

    /// `eta,mean_bias,q05,q25,q50,q75,q95,n_events,replicas`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,mean_bias,q05,q25,q50,q75,q95,n_events,replicas\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.eta, c.mean_bias, c.q05, c.q25, c.q50, c.q75, c.q95, self.n_events, c.used
            );
        }
        out
    }

    /// Writes to a sibling temporary file and renames it over `path`, so
    /// readers never observe a partial table.
    pub fn save_atomic(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("bias_table.json");
        let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Whether this table was produced for the given study protocol.
    pub fn matches(&self, study: &BiasStudy) -> bool {
        self.n_events == study.n_events
            && self.replicas == study.replicas
            && self.family == study.kernel.family()
            && self.provenance.seed == study.rng.seed
            && self.provenance.stream == study.rng.stream
            && self.provenance.burn_in == study.burn_in
            && self.provenance.mu == study.mu
            && self.provenance.kernel == study.kernel
            && self.cells.iter().map(|c| c.eta).eq(study.eta_grid.iter().copied())
    }

    /// Loads a cached table when it matches `study`, otherwise builds and
    /// caches a new one.
    pub fn load_or_build(path: &Path, study: &BiasStudy) -> Result<Self> {
        if let Ok(table) = Self::load(path) {
            if table.matches(study) {
                return Ok(table);
            }
        }
        let table = build_bias_study(study)?.table;
        table.save_atomic(path)?;
        Ok(table)
    }
}

/// Bias table for the exponential kernel with the default burn-in.
pub fn build_bias_table(
    eta_grid: &[f64],
    mu: f64,
    tau: f64,
    n_events: usize,
    replicas: usize,
    rng: RngSpec,
) -> Result<BiasTable> {
    let study = BiasStudy::exponential(eta_grid.to_vec(), mu, tau, n_events, replicas, rng);
    Ok(build_bias_study(&study)?.table)
}

/// Simulates `n_events + burn_in` events per replica by thinning, discards
/// the burn-in, fits, and summarizes `η̂ − η` per grid cell.
///
/// Replicas whose simulation trips the explosion guard or whose fit fails
/// are excluded and counted. A cell with no usable replica is an error.
pub fn build_bias_study(study: &BiasStudy) -> Result<BiasStudyOutput> {
    study.validate()?;
    let fit_options = FitOptions { family: study.kernel.family(), ..study.fit };
    let jobs: Vec<(usize, usize)> =
        (0..study.eta_grid.len()).flat_map(|g| (0..study.replicas).map(move |r| (g, r))).collect();

    let replicas: Vec<BiasReplica> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let eta_true = study.eta_grid[g];
            let rng = RngSpec::for_cell(study.rng.seed, study.rng.stream as usize, g, r);
            let outcome = (|| -> Result<(HawkesParams, bool, Option<f64>)> {
                let truth = HawkesParams::new(study.mu, study.kernel.with_eta(eta_true))?;
                let events = simulate_thinning(&truth, study.n_events + study.burn_in, rng)?;
                let events = events.discard_burn_in(study.burn_in)?;
                let fit = fit_hawkes(&events, &fit_options)?;
                let residuals = residual_process(&events, &fit.params);
                let p = ks_uniform_test(&residuals.u).ok().map(|r| r.p_value);
                Ok((fit.params, fit.converged, p))
            })();
            match outcome {
                Ok((estimate, converged, ks_p_value)) => BiasReplica {
                    eta_true,
                    replica: r,
                    estimate: Some(estimate),
                    converged,
                    ks_p_value,
                    excluded_reason: None,
                },
                Err(e) => BiasReplica {
                    eta_true,
                    replica: r,
                    estimate: None,
                    converged: false,
                    ks_p_value: None,
                    excluded_reason: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(study.eta_grid.len());
    for (g, &eta) in study.eta_grid.iter().enumerate() {
        let chunk = &replicas[g * study.replicas..(g + 1) * study.replicas];
        let errors: Vec<f64> = chunk.iter().filter_map(|r| r.estimate.map(|p| p.eta() - eta)).collect();
        let sorted = sorted_finite(&errors);
        if sorted.is_empty() {
            let reason = chunk.iter().find_map(|r| r.excluded_reason.clone()).unwrap_or_default();
            return Err(Error::Degenerate(format!("every replica of the eta = {eta} cell failed: {reason}")));
        }
        let q = |p| quantile_sorted(&sorted, p);
        cells.push(BiasCell {
            eta,
            mean_bias: mean(&sorted),
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            used: sorted.len(),
            excluded: chunk.len() - sorted.len(),
        });
    }

    let table = BiasTable {
        family: study.kernel.family(),
        n_events: study.n_events,
        replicas: study.replicas,
        cells,
        provenance: BiasProvenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            seed: study.rng.seed,
            stream: study.rng.stream,
            mu: study.mu,
            kernel: study.kernel,
            burn_in: study.burn_in,
            fit: fit_options,
        },
    };
    Ok(BiasStudyOutput { table, replicas })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedEta {
    pub eta: f64,
    /// More than one `η` maps onto `η̂`; `eta` is the smallest.
    pub ambiguous: bool,
}

/// Solves `η + b(η) = η̂` where `b` interpolates the table's mean bias
/// linearly between cells and is held constant beyond the first and last
/// cell. The answer is clamped to `[0, 1]`.
pub fn correct_eta(eta_hat: f64, table: &BiasTable) -> Result<CorrectedEta> {
    if table.cells.is_empty() {
        return Err(Error::param("bias table has no cells"));
    }
    if !(0.0..=1.0).contains(&eta_hat) {
        return Err(Error::param(format!("eta_hat must lie in [0, 1], got {eta_hat}")));
    }
    let first = &table.cells[0];
    let last = &table.cells[table.cells.len() - 1];
    // Knots of g(η) = η + b(η) on [0, 1].
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(table.cells.len() + 2);
    if first.eta > 0.0 {
        knots.push((0.0, first.mean_bias));
    }
    knots.extend(table.cells.iter().map(|c| (c.eta, c.eta + c.mean_bias)));
    if last.eta < 1.0 {
        knots.push((1.0, 1.0 + last.mean_bias));
    }

    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let ((x0, g0), (x1, g1)) = (w[0], w[1]);
        let (lo, hi) = if g0 <= g1 { (g0, g1) } else { (g1, g0) };
        if eta_hat < lo || eta_hat > hi {
            continue;
        }
        let root = if g1 == g0 { x0 } else { x0 + (eta_hat - g0) * (x1 - x0) / (g1 - g0) };
        if roots.last().is_none_or(|&r| (root - r).abs() > 1e-12) {
            roots.push(root);
        }
    }

    let eta = match roots.first() {
        Some(&r) => r,
        None => {
            let g_min = knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
            if eta_hat <= g_min {
                0.0
            } else {
                1.0
            }
        }
    };
    Ok(CorrectedEta { eta: eta.clamp(0.0, 1.0), ambiguous: roots.len() > 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn synthetic(cells: &[(f64, f64)]) -> BiasTable {
        BiasTable {
            family: KernelFamily::Exponential,
            n_events: 3000,
            replicas: 10,
            cells: cells
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
                crate_version: String::new(),
                rng_algorithm: String::new(),
                seed: 0,
                stream: 0,
                mu: 1.0,
                kernel: Kernel::exponential(0.0, 1.0),
                burn_in: 500,
                fit: FitOptions::default(),
            },
        }
    }

    #[test]
    fn zero_bias_is_identity() {
        let t = synthetic(&[(0.0, 0.0), (0.5, 0.0), (0.95, 0.0)]);
        for x in [0.0, 0.1, 0.5, 0.9, 0.97, 1.0] {
            let c = correct_eta(x, &t).unwrap();
            assert_relative_eq!(c.eta, x, epsilon = 1e-15);
            assert!(!c.ambiguous);
        }
    }

    #[test]
    fn two_cell_interpolation() {
        let t = synthetic(&[(0.5, 0.0), (0.95, -0.05)]);
        assert_relative_eq!(correct_eta(0.9, &t).unwrap().eta, 0.95, epsilon = 1e-12);
        // Halfway: g(0.725) = 0.725 − 0.025 = 0.7
        assert_relative_eq!(correct_eta(0.7, &t).unwrap().eta, 0.725, epsilon = 1e-12);
    }

    #[test]
    fn positive_bias_near_zero_clamps() {
        let t = synthetic(&[(0.0, 0.03), (0.5, 0.0)]);
        assert_eq!(correct_eta(0.01, &t).unwrap().eta, 0.0);
        assert_relative_eq!(correct_eta(0.03, &t).unwrap().eta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn non_monotone_curve_flags_ambiguity() {
        let t = synthetic(&[(0.0, 0.0), (0.5, 0.3), (0.6, 0.0)]);
        let c = correct_eta(0.65, &t).unwrap();
        assert!(c.ambiguous);
        assert!(c.eta < 0.5);
    }

    #[test]
    fn rejects_out_of_range_input() {
        let t = synthetic(&[(0.5, 0.0)]);
        assert!(correct_eta(1.2, &t).is_err());
        assert!(correct_eta(-0.1, &t).is_err());
    }

    #[test]
    fn csv_layout() {
        let t = synthetic(&[(0.0, 0.01), (0.5, 0.0)]);
        let csv = t.to_csv();
        assert!(csv.starts_with("eta,mean_bias,q05,q25,q50,q75,q95,n_events,replicas\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn atomic_save_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/table.json");
        let t = synthetic(&[(0.0, 0.01), (0.5, -0.002)]);
        t.save_atomic(&path).unwrap();
        assert_eq!(BiasTable::load(&path).unwrap(), t);
        let leftovers: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
