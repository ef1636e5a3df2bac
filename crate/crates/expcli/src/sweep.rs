//! ACD → Hawkes calibration experiments: the ζ sweep and the (α, β) grid.

use endo_core::acd::{simulate_acd, AcdParams};
use endo_core::diagnostics::{ks_uniform_test, residual_process};
use endo_core::estimate::{build_bias_study, correct_eta, fit_hawkes, BiasStudy, BiasStudyOutput, BiasTable, FitOptions};
use endo_core::hawkes::{Kernel, KernelFamily};
use endo_core::rng::RngSpec;
use endo_core::stats::{mean, quantile_sorted, sorted_finite};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{SweepCase, SweepConfig};
use crate::error::{HarnessError, Result};

/// Outer stream index of grid cells; sweep cases use `0..5`.
pub const GRID_STREAM_BASE: usize = 0x1000;
pub const TABLE1_STREAM_BASE: usize = 0x2000;
/// Stream of the bias study.
pub const BIAS_STREAM: u64 = 0x3000;

/// Mean and quantiles of one quantity over the successful replicas of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub q025: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub q975: f64,
}

impl Band {
    /// Sorts before summarizing, so the result does not depend on replica order.
    pub fn of(values: &[f64]) -> Band {
        let s = sorted_finite(values);
        if s.is_empty() {
            let nan = f64::NAN;
            return Band { mean: nan, q025: nan, q05: nan, q25: nan, q50: nan, q75: nan, q95: nan, q975: nan };
        }
        let q = |p| quantile_sorted(&s, p);
        Band {
            mean: mean(&s),
            q025: q(0.025),
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            q975: q(0.975),
        }
    }
}

/// Outcome of one simulated and calibrated ACD realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
    pub replica: usize,
    pub seed: u64,
    pub stream: u64,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub tau: Option<f64>,
    pub eta_corrected: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub p_value: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Simulates ACD(1,1) with `ω = 1`, drops the burn-in, fits the exponential
/// Hawkes model and tests its residuals.
pub fn acd_replica(
    label: &str,
    alpha: f64,
    beta: f64,
    replica: usize,
    rng: RngSpec,
    events: usize,
    burn_in: usize,
    fit: &FitOptions,
    table: Option<&BiasTable>,
) -> ReplicaRecord {
    let mut rec = ReplicaRecord {
        label: label.to_string(),
        alpha,
        beta,
        replica,
        seed: rng.seed,
        stream: rng.stream,
        mu: None,
        eta: None,
        tau: None,
        eta_corrected: None,
        log_likelihood: None,
        p_value: None,
        converged: false,
        error: None,
    };
    let outcome = (|| -> endo_core::Result<()> {
        let params = AcdParams::new(1.0, alpha, beta)?;
        let sim = simulate_acd(&params, events, rng)?;
        let series = sim.events.discard_burn_in(burn_in)?;
        let fitted = fit_hawkes(&series, &fit.with_family(KernelFamily::Exponential))?;
        if let Kernel::Exponential { eta, tau } = fitted.params.kernel {
            rec.mu = Some(fitted.params.mu);
            rec.eta = Some(eta);
            rec.tau = Some(tau);
        }
        rec.log_likelihood = Some(fitted.log_likelihood);
        rec.converged = fitted.converged;
        if let Some(t) = table {
            rec.eta_corrected = Some(correct_eta(fitted.params.eta(), t)?.eta);
        }
        let residuals = residual_process(&series, &fitted.params);
        rec.p_value = Some(ks_uniform_test(&residuals.u)?.p_value);
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub zeta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mu: Band,
    pub eta: Band,
    pub tau: Band,
    pub eta_corrected: Option<Band>,
    pub p_value: Band,
    pub reject_rate_5pct: f64,
    pub reject_rate_10pct: f64,
    /// More than half of the replicas failed.
    pub failed: bool,
}

impl CellSummary {
    pub fn from_replicas(label: &str, alpha: f64, beta: f64, records: &[ReplicaRecord]) -> CellSummary {
        let ok: Vec<&ReplicaRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let pick = |f: fn(&ReplicaRecord) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
        let p = pick(|r| r.p_value);
        let corrected = pick(|r| r.eta_corrected);
        let rate = |level: f64| {
            if p.is_empty() {
                f64::NAN
            } else {
                p.iter().filter(|&&v| v < level).count() as f64 / p.len() as f64
            }
        };
        let n_failed = records.len() - ok.len();
        CellSummary {
            label: label.to_string(),
            zeta: alpha + beta,
            alpha,
            beta,
            n_ok: ok.len(),
            n_failed,
            mu: Band::of(&pick(|r| r.mu)),
            eta: Band::of(&pick(|r| r.eta)),
            tau: Band::of(&pick(|r| r.tau)),
            eta_corrected: (!corrected.is_empty()).then(|| Band::of(&corrected)),
            p_value: Band::of(&p),
            reject_rate_5pct: rate(0.05),
            reject_rate_10pct: rate(0.10),
            failed: 2 * n_failed > records.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellSummary>,
    pub replicas: Vec<ReplicaRecord>,
    pub bias_corrected: bool,
}

impl SweepResult {
    /// Fails when any cell lost more than half of its replicas.
    pub fn check(&self) -> Result<()> {
        let failed: Vec<String> = self
            .cells
            .iter()
            .filter(|c| c.failed)
            .map(|c| format!("{} (alpha={}, beta={}): {} of {} failed", c.label, c.alpha, c.beta, c.n_failed, c.n_failed + c.n_ok))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Experiment(failed.join("; ")))
        }
    }

    pub fn cell(&self, label: &str, zeta_index: usize) -> Option<&CellSummary> {
        self.cells.iter().filter(|c| c.label == label).nth(zeta_index)
    }
}

/// Bias study protocol matching the sweep's realization length.
pub fn bias_study_for(cfg: &SweepConfig) -> BiasStudy {
    let mut study = BiasStudy::exponential(
        cfg.bias_eta_grid.clone(),
        cfg.bias_mu,
        cfg.bias_tau,
        cfg.fit_events(),
        cfg.scaled_bias_replicas(),
        RngSpec::new(cfg.seed, BIAS_STREAM),
    );
    study.burn_in = cfg.burn_in;
    study.fit = cfg.fit;
    study
}

/// Loads the configured bias table, building and caching it when it is
/// missing or was produced by a different protocol.
pub fn prepare_bias_table(cfg: &SweepConfig) -> Result<Option<BiasTable>> {
    let Some(path) = &cfg.bias_table else { return Ok(None) };
    Ok(Some(BiasTable::load_or_build(path, &bias_study_for(cfg))?))
}

/// Runs the bias study of the configuration and caches its table at
/// `cfg.bias_table` when set.
pub fn run_bias_study(cfg: &SweepConfig) -> Result<BiasStudyOutput> {
    cfg.validate()?;
    let output = build_bias_study(&bias_study_for(cfg))?;
    if let Some(path) = &cfg.bias_table {
        output.table.save_atomic(path)?;
    }
    Ok(output)
}

struct Cell {
    label: String,
    alpha: f64,
    beta: f64,
    outer: usize,
    inner: usize,
}

fn run_cells(cells: &[Cell], cfg: &SweepConfig, table: Option<&BiasTable>) -> SweepResult {
    let replicas = cfg.scaled_replicas();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..replicas).map(move |r| (c, r))).collect();
    let records: Vec<ReplicaRecord> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            let rng = RngSpec::for_cell(cfg.seed, cell.outer, cell.inner, r);
            acd_replica(&cell.label, cell.alpha, cell.beta, r, rng, cfg.events, cfg.burn_in, &cfg.fit, table)
        })
        .collect();
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| CellSummary::from_replicas(&cell.label, cell.alpha, cell.beta, &records[c * replicas..(c + 1) * replicas]))
        .collect();
    SweepResult { cells: summaries, replicas: records, bias_corrected: table.is_some() }
}

/// Runs the sweep after loading or building the configured bias table.
pub fn run_zeta_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let table = prepare_bias_table(cfg)?;
    run_zeta_sweep_with(cfg, table.as_ref())
}

/// Every (case, ζ) cell of the configuration. Replica `r` of case `k` at grid
/// index `z` uses stream `(k, z, r)`, independent of scheduling.
pub fn run_zeta_sweep_with(cfg: &SweepConfig, table: Option<&BiasTable>) -> Result<SweepResult> {
    cfg.validate()?;
    let cells: Vec<Cell> = cfg
        .cases
        .iter()
        .flat_map(|&case| {
            let k = SweepCase::ALL.iter().position(|&c| c == case).unwrap_or(0);
            cfg.zeta_grid.iter().enumerate().map(move |(z, &zeta)| {
                let (alpha, beta) = case.split(zeta);
                Cell { label: case.name().to_string(), alpha, beta, outer: k, inner: z }
            })
        })
        .collect();
    Ok(run_cells(&cells, cfg, table))
}

pub fn run_grid(cfg: &SweepConfig) -> Result<SweepResult> {
    let table = prepare_bias_table(cfg)?;
    run_grid_with(&cfg.alpha_grid, &cfg.beta_grid, cfg, table.as_ref())
}

/// Cells with `α + β ≤ 1` of the product grid; the rest are skipped.
pub fn run_grid_with(alpha_grid: &[f64], beta_grid: &[f64], cfg: &SweepConfig, table: Option<&BiasTable>) -> Result<SweepResult> {
    cfg.validate()?;
    if alpha_grid.len() >= 1 << 12 || beta_grid.len() >= 1 << 16 {
        return Err(HarnessError::Config("grid too large".into()));
    }
    let mut cells = Vec::new();
    for (ai, &alpha) in alpha_grid.iter().enumerate() {
        for (bi, &beta) in beta_grid.iter().enumerate() {
            if alpha + beta <= 1.0 + 1e-12 {
                cells.push(Cell { label: "grid".into(), alpha, beta, outer: GRID_STREAM_BASE + ai, inner: bi });
            }
        }
    }
    Ok(run_cells(&cells, cfg, table))
}
