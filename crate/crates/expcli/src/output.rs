//! Figure-data CSV files and the run manifest.
//!
//! Column schemas:
//! - `fig3_a_mu.csv`, `fig3_b_eta.csv`, `fig3_c_tau.csv`, `fig4_eta_corrected.csv`:
//!   `case,zeta,alpha,beta,mean,q05,q25,q50,q75,q95,n_ok,n_failed`
//! - `fig3_d_pvalue.csv`:
//!   `case,zeta,alpha,beta,mean,q025,q975,q05,q95,reject_rate_5pct,reject_rate_10pct,n_ok,n_failed`
//! - `fig5_grid.csv`:
//!   `alpha,beta,zeta,eta_mean,eta_corrected_mean,mu_mean,tau_mean,p_mean,reject_5pct,reject_rate_5pct,n_ok,n_failed`
//! - `fig6_kernel_profile.csv`: `t,h_exp,h_pow,rel_diff`
//! - `fig7_a_mu.csv`, `fig7_b_eta.csv`, `fig7_c_tau.csv` (errors `θ̂ − θ`) and
//!   `fig7_d_pvalue.csv`: `eta,mean,q05,q25,q50,q75,q95,n_ok,n_excluded`
//! - `table1.csv`: one row per realization with both fits
//!   (`case,alpha,beta,replica,n_events,mu_exp,eta_exp,tau_exp,mu_pow,eta_pow,c_pow,phi_pow,loglik_exp,loglik_pow,aic_exp,aic_pow,selected,error`)

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use endo_core::estimate::BiasStudyOutput;
use endo_core::hawkes::Kernel;
use endo_core::rng::RNG_ALGORITHM;
use serde::{Deserialize, Serialize};

use crate::config::SweepConfig;
use crate::error::{HarnessError, Result};
use crate::sweep::{Band, CellSummary, ReplicaRecord, SweepResult};
use crate::table1::{row_profile, Table1Result};

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("write to memory");
        Self { w }
    }

    fn row(&mut self, fields: Vec<String>) {
        self.w.write_record(&fields).expect("write to memory");
    }

    fn finish(self) -> Vec<u8> {
        self.w.into_inner().expect("flush to memory")
    }
}

/// Writes `bytes` to `dir/name`, creating `dir`, and returns the path.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(value).expect("serializable")
}

fn band_fields(b: &Band) -> Vec<String> {
    vec![num(b.mean), num(b.q05), num(b.q25), num(b.q50), num(b.q75), num(b.q95)]
}

const BAND_HEADER: [&str; 12] =
    ["case", "zeta", "alpha", "beta", "mean", "q05", "q25", "q50", "q75", "q95", "n_ok", "n_failed"];

fn band_csv(cells: &[CellSummary], pick: impl Fn(&CellSummary) -> Option<Band>) -> Vec<u8> {
    let mut csv = Csv::new(&BAND_HEADER);
    for c in cells {
        let Some(b) = pick(c) else { continue };
        let mut row = vec![c.label.clone(), num(c.zeta), num(c.alpha), num(c.beta)];
        row.extend(band_fields(&b));
        row.extend([c.n_ok.to_string(), c.n_failed.to_string()]);
        csv.row(row);
    }
    csv.finish()
}

fn replicas_csv(records: &[ReplicaRecord]) -> Vec<u8> {
    let mut csv = Csv::new(&[
        "label", "alpha", "beta", "replica", "seed", "stream", "mu", "eta", "tau", "eta_corrected", "log_likelihood",
        "p_value", "converged", "error",
    ]);
    for r in records {
        csv.row(vec![
            r.label.clone(),
            num(r.alpha),
            num(r.beta),
            r.replica.to_string(),
            r.seed.to_string(),
            r.stream.to_string(),
            opt(r.mu),
            opt(r.eta),
            opt(r.tau),
            opt(r.eta_corrected),
            opt(r.log_likelihood),
            opt(r.p_value),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    csv.finish()
}

pub fn write_sweep_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let cells = &result.cells;
    let mut out = vec![
        write_file(dir, "fig3_a_mu.csv", &band_csv(cells, |c| Some(c.mu)))?,
        write_file(dir, "fig3_b_eta.csv", &band_csv(cells, |c| Some(c.eta)))?,
        write_file(dir, "fig3_c_tau.csv", &band_csv(cells, |c| Some(c.tau)))?,
    ];
    let mut p = Csv::new(&[
        "case", "zeta", "alpha", "beta", "mean", "q025", "q975", "q05", "q95", "reject_rate_5pct", "reject_rate_10pct",
        "n_ok", "n_failed",
    ]);
    for c in cells {
        let b = &c.p_value;
        p.row(vec![
            c.label.clone(),
            num(c.zeta),
            num(c.alpha),
            num(c.beta),
            num(b.mean),
            num(b.q025),
            num(b.q975),
            num(b.q05),
            num(b.q95),
            num(c.reject_rate_5pct),
            num(c.reject_rate_10pct),
            c.n_ok.to_string(),
            c.n_failed.to_string(),
        ]);
    }
    out.push(write_file(dir, "fig3_d_pvalue.csv", &p.finish())?);
    if result.bias_corrected {
        out.push(write_file(dir, "fig4_eta_corrected.csv", &band_csv(cells, |c| c.eta_corrected))?);
    }
    out.push(write_file(dir, "sweep_replicas.csv", &replicas_csv(&result.replicas))?);
    out.push(write_file(dir, "sweep_cells.json", &json(cells))?);
    Ok(out)
}

pub fn write_grid_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csv = Csv::new(&[
        "alpha", "beta", "zeta", "eta_mean", "eta_corrected_mean", "mu_mean", "tau_mean", "p_mean", "reject_5pct",
        "reject_rate_5pct", "n_ok", "n_failed",
    ]);
    for c in &result.cells {
        csv.row(vec![
            num(c.alpha),
            num(c.beta),
            num(c.zeta),
            num(c.eta.mean),
            opt(c.eta_corrected.map(|b| b.mean)),
            num(c.mu.mean),
            num(c.tau.mean),
            num(c.p_value.mean),
            (c.p_value.mean < 0.05).to_string(),
            num(c.reject_rate_5pct),
            c.n_ok.to_string(),
            c.n_failed.to_string(),
        ]);
    }
    Ok(vec![
        write_file(dir, "fig5_grid.csv", &csv.finish())?,
        write_file(dir, "grid_replicas.csv", &replicas_csv(&result.replicas))?,
        write_file(dir, "grid_cells.json", &json(&result.cells))?,
    ])
}

pub fn write_bias_outputs(study: &BiasStudyOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let table = &study.table;
    let mu0 = table.provenance.mu;
    let tau0 = match table.provenance.kernel {
        Kernel::Exponential { tau, .. } => Some(tau),
        Kernel::PowerLaw { .. } => None,
    };
    let header = ["eta", "mean", "q05", "q25", "q50", "q75", "q95", "n_ok", "n_excluded"];
    let mut panels = [Csv::new(&header), Csv::new(&header), Csv::new(&header), Csv::new(&header)];
    for cell in &table.cells {
        let reps: Vec<_> = study.replicas.iter().filter(|r| r.eta_true == cell.eta).collect();
        let ok: Vec<_> = reps.iter().filter_map(|r| r.estimate).collect();
        let columns: [Vec<f64>; 4] = [
            ok.iter().map(|p| p.mu - mu0).collect(),
            ok.iter().map(|p| p.eta() - cell.eta).collect(),
            ok.iter()
                .filter_map(|p| match (p.kernel, tau0) {
                    (Kernel::Exponential { tau, .. }, Some(t0)) => Some(tau - t0),
                    _ => None,
                })
                .collect(),
            reps.iter().filter_map(|r| r.ks_p_value).collect(),
        ];
        for (panel, values) in panels.iter_mut().zip(columns) {
            let b = Band::of(&values);
            let mut row = vec![num(cell.eta)];
            row.extend(band_fields(&b));
            row.extend([values.len().to_string(), (reps.len() - ok.len()).to_string()]);
            panel.row(row);
        }
    }
    let [a, b, c, d] = panels;
    Ok(vec![
        write_file(dir, "bias_table.json", table.to_json()?.as_bytes())?,
        write_file(dir, "bias_table.csv", table.to_csv().as_bytes())?,
        write_file(dir, "fig7_a_mu.csv", &a.finish())?,
        write_file(dir, "fig7_b_eta.csv", &b.finish())?,
        write_file(dir, "fig7_c_tau.csv", &c.finish())?,
        write_file(dir, "fig7_d_pvalue.csv", &d.finish())?,
        write_file(dir, "bias_replicas.json", &json(&study.replicas))?,
    ])
}

pub fn write_table1_outputs(result: &Table1Result, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csv = Csv::new(&[
        "case", "alpha", "beta", "replica", "n_events", "mu_exp", "eta_exp", "tau_exp", "mu_pow", "eta_pow", "c_pow",
        "phi_pow", "loglik_exp", "loglik_pow", "aic_exp", "aic_pow", "selected", "error",
    ]);
    for row in &result.rows {
        let cmp = row.comparison.as_ref();
        let exp = cmp.and_then(|c| c.exponential.as_ref());
        let pow = cmp.and_then(|c| c.power_law.as_ref());
        let (mut tau, mut c_pow, mut phi) = (None, None, None);
        if let Some(Kernel::Exponential { tau: t, .. }) = exp.map(|f| f.params.kernel) {
            tau = Some(t);
        }
        if let Some(Kernel::PowerLaw { c, phi: p, .. }) = pow.map(|f| f.params.kernel) {
            c_pow = Some(c);
            phi = Some(p);
        }
        let mut error = row.error.clone().unwrap_or_default();
        if let Some(c) = cmp {
            if !c.warnings.is_empty() {
                error = c.warnings.join("; ");
            }
        }
        csv.row(vec![
            row.case.clone(),
            num(row.alpha),
            num(row.beta),
            row.replica.to_string(),
            row.n_events.to_string(),
            opt(exp.map(|f| f.params.mu)),
            opt(exp.map(|f| f.params.eta())),
            opt(tau),
            opt(pow.map(|f| f.params.mu)),
            opt(pow.map(|f| f.params.eta())),
            opt(c_pow),
            opt(phi),
            opt(exp.map(|f| f.log_likelihood)),
            opt(pow.map(|f| f.log_likelihood)),
            opt(cmp.and_then(|c| c.aic_exponential)),
            opt(cmp.and_then(|c| c.aic_power_law)),
            cmp.map(|c| c.selected.to_string()).unwrap_or_default(),
            error,
        ]);
    }
    let mut out = vec![
        write_file(dir, "table1.csv", &csv.finish())?,
        write_file(dir, "table1.json", &json(result))?,
    ];
    // Profile of the single seeded realization of case C when configured,
    // otherwise of the first row with both fits.
    let profile = result
        .rows
        .iter()
        .filter(|r| r.replica == 0)
        .find(|r| r.case == "C")
        .and_then(row_profile)
        .or_else(|| result.rows.iter().find_map(row_profile));
    if let Some(p) = profile {
        out.push(write_file(dir, "fig6_kernel_profile.csv", p.to_csv().as_bytes())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub library_version: String,
    pub rng_algorithm: String,
    pub base_seed: u64,
    pub stream_layout: String,
    pub config: SweepConfig,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &SweepConfig) -> Self {
        Self {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            base_seed: config.seed,
            stream_layout: "stream = outer << 48 | inner << 32 | replica; sweep outer = case index, inner = zeta index; \
                            grid outer = 0x1000 + alpha index, inner = beta index; table1 outer = 0x2000 + case; \
                            bias study base stream 0x3000 with inner = eta index"
                .to_string(),
            config: config.clone(),
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time_s: 0.0,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        write_file(dir, "manifest.json", &json(self))
    }
}
