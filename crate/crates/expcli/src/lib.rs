//! Experiment harness: configuration, event ingestion, the calibration
//! sweeps, the bias study, the kernel comparison and figure-data output.

pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod sweep;
pub mod table1;

pub use config::{linspace, SweepCase, SweepConfig};
pub use error::{HarnessError, Result};
pub use ingest::{extract_pot_events, ingest_events, EventFormat};
pub use sweep::{run_bias_study, run_grid, run_grid_with, run_zeta_sweep, run_zeta_sweep_with, CellSummary, SweepResult};
pub use table1::{run_table1, Table1Result};

/// Runs `f` on a thread pool of `jobs` workers, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Config(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
