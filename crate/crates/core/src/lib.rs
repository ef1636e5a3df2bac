//! Simulation, likelihood calibration and goodness-of-fit for Hawkes
//! processes with exponential or power-law memory kernels, and for the
//! exponential ACD(1,1) duration model.
//!
//! The branching ratio `η` of a fitted Hawkes model measures the fraction of
//! events triggered by earlier events. The experiment harness in `endo-expcli`
//! uses this crate to fit Hawkes models to ACD data and map the ACD
//! persistence `α + β` onto `η`.

pub mod acd;
pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod events;
pub mod hawkes;
pub mod rng;
pub mod stats;

pub use acd::{acd_intensity_at, simulate_acd, AcdParams, AcdRealization};
pub use diagnostics::{
    aic, compare_kernels, kernel_distance_profile, ks_uniform_test, residual_process, GofReport, KernelComparison,
    KernelProfile, ResidualSeries,
};
pub use error::{Error, Result};
pub use estimate::{build_bias_table, correct_eta, fit_hawkes, BiasTable, FitOptions, FitResult};
pub use events::{durations_to_events, events_to_durations, DurationSeries, EventSeries};
pub use hawkes::{
    compensator, intensity_at, log_likelihood, simulate_branching, simulate_thinning, HawkesParams, Kernel,
    KernelFamily,
};
pub use rng::RngSpec;
