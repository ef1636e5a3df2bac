//! Maximum-likelihood calibration of Hawkes models.
//!
//! The optimizer works on unconstrained coordinates:
//! `μ = e^a`, `τ = e^b`, `η = η_max·logistic(c')`, and for the power law
//! `c = e^d`, `φ = 1 + e^e`.

mod bias;
mod optim;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSeries;
use crate::hawkes::{window_log_likelihood, HawkesParams, Kernel, KernelFamily, Window};
use crate::rng::RngSpec;

pub use bias::{
    build_bias_study, build_bias_table, correct_eta, BiasCell, BiasProvenance, BiasReplica, BiasStudy,
    BiasStudyOutput, BiasTable, CorrectedEta, DEFAULT_BURN_IN,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub family: KernelFamily,
    pub n_starts: usize,
    /// Absolute tolerance on the log-likelihood.
    pub tol_loglik: f64,
    /// Relative tolerance on the transformed parameters.
    pub tol_params: f64,
    pub max_iter: usize,
    /// Open upper bound on `η`.
    pub eta_max: f64,
    pub min_events: usize,
    /// Seed of the randomized starts.
    pub seed: u64,
    /// Relative cut-off of the power-law pair sum; `None` sums every pair.
    pub powerlaw_truncation: Option<f64>,
    /// Upper bound on the exponential `τ` as a multiple of the likelihood
    /// window length; `None` leaves `τ` unbounded.
    pub max_tau_fraction: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            family: KernelFamily::Exponential,
            n_starts: 5,
            tol_loglik: 1e-8,
            tol_params: 1e-6,
            max_iter: 500,
            eta_max: 1.0 - 1e-6,
            min_events: 50,
            seed: 0x5eed,
            powerlaw_truncation: Some(1e-12),
            max_tau_fraction: Some(1.0),
        }
    }
}

impl FitOptions {
    pub fn with_family(self, family: KernelFamily) -> Self {
        Self { family, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_loglik > 0.0 && self.tol_params > 0.0) {
            return Err(Error::param("fit tolerances must be positive"));
        }
        if self.n_starts == 0 {
            return Err(Error::param("at least one start is required"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        if !(self.eta_max > 0.0 && self.eta_max <= 1.0) {
            return Err(Error::param(format!("eta_max must lie in (0, 1], got {}", self.eta_max)));
        }
        if let Some(tol) = self.powerlaw_truncation {
            if !(tol > 0.0) {
                return Err(Error::param("power-law truncation must be positive"));
            }
        }
        if let Some(f) = self.max_tau_fraction {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::param("max_tau_fraction must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: KernelFamily,
    pub params: HawkesParams,
    pub log_likelihood: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub eta_corrected: Option<f64>,
    /// Index of the winning start; indices past `n_starts` are caller-supplied starts.
    pub best_start: usize,
    /// Final log-likelihood of every start, `None` where the start was infeasible.
    pub start_log_likelihoods: Vec<Option<f64>>,
    pub n_events: usize,
}

impl FitResult {
    /// Fills `eta_corrected` from a bias table.
    pub fn with_bias_correction(mut self, table: &BiasTable) -> Result<Self> {
        self.eta_corrected = Some(correct_eta(self.params.eta(), table)?.eta);
        Ok(self)
    }
}

/// Initial point on the natural scale; `timescale` is the kernel's mean lag.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Start {
    mu: f64,
    eta: f64,
    timescale: f64,
}

/// Power-law exponent used when a start is given only as a time scale. With
/// `φ = 3` the mean lag `c/(φ−2)` equals `c`.
const POWER_LAW_START_PHI: f64 = 3.0;

/// Likelihood window used for calibration: conditioned on the first event,
/// with the compensator running over `[t_1, T]`.
fn fit_window(events: &EventSeries) -> Window<'_> {
    let times = events.times();
    Window { times, start: times[0], end: events.horizon(), skip: 1 }
}

fn window_durations(events: &EventSeries) -> Vec<f64> {
    events.times().windows(2).map(|w| w[1] - w[0]).collect()
}

/// One moment-based start followed by `n_starts − 1` randomized ones.
fn start_schedule(events: &EventSeries, options: &FitOptions) -> Vec<Start> {
    let durations = window_durations(events);
    let mean_duration = crate::stats::mean(&durations);
    let rate = durations.len() as f64 / (events.horizon() - events.times()[0]);
    let eta_cap = 0.95 * options.eta_max;
    let mut starts = vec![Start { mu: 0.5 * rate, eta: 0.5_f64.min(eta_cap), timescale: mean_duration }];
    let mut gen = RngSpec::new(options.seed, 0).generator();
    for _ in 1..options.n_starts {
        let eta = gen.random_range(0.05..0.9_f64).min(eta_cap);
        let timescale = mean_duration * gen.random_range(-1.5..1.5_f64).exp();
        let mu = (1.0 - eta) * rate * gen.random_range(-0.3..0.3_f64).exp();
        starts.push(Start { mu, eta, timescale });
    }
    starts
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Map between the optimizer's unconstrained coordinates and the natural
/// parameters.
#[derive(Debug, Clone, Copy)]
struct Transform {
    family: KernelFamily,
    eta_max: f64,
    /// Exponential kernel only.
    tau_max: Option<f64>,
}

impl Transform {
    fn encode(&self, params: &HawkesParams) -> Vec<f64> {
        let eta = (params.eta() / self.eta_max).clamp(1e-6, 1.0 - 1e-6);
        match params.kernel {
            Kernel::Exponential { tau, .. } => {
                let b = match self.tau_max {
                    Some(max) => logit((tau / max).clamp(1e-12, 0.5)),
                    None => tau.ln(),
                };
                vec![params.mu.ln(), logit(eta), b]
            }
            Kernel::PowerLaw { c, phi, .. } => vec![params.mu.ln(), logit(eta), c.ln(), (phi - 1.0).max(1e-6).ln()],
        }
    }

    /// Natural parameters and the diagonal Jacobian `∂natural/∂x`.
    fn decode(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mu = x[0].exp();
        let s = logistic(x[1]);
        let eta = self.eta_max * s;
        let d_eta = self.eta_max * s * (1.0 - s);
        match self.family {
            KernelFamily::Exponential => {
                let (tau, d_tau) = match self.tau_max {
                    Some(max) => {
                        let r = logistic(x[2]);
                        (max * r, max * r * (1.0 - r))
                    }
                    None => {
                        let tau = x[2].exp();
                        (tau, tau)
                    }
                };
                (vec![mu, eta, tau], vec![mu, d_eta, d_tau])
            }
            KernelFamily::PowerLaw => {
                let c = x[2].exp();
                let phi_minus_1 = x[3].exp();
                (vec![mu, eta, c, 1.0 + phi_minus_1], vec![mu, d_eta, c, phi_minus_1])
            }
        }
    }

    fn params(&self, v: &[f64]) -> Result<HawkesParams> {
        let kernel = match self.family {
            KernelFamily::Exponential => Kernel::exponential(v[1], v[2]),
            KernelFamily::PowerLaw => Kernel::power_law(v[1], v[2], v[3]),
        };
        HawkesParams::with_eta_max(v[0], kernel, self.eta_max)
    }
}

fn start_params(start: &Start, family: KernelFamily) -> Result<HawkesParams> {
    let kernel = match family {
        KernelFamily::Exponential => Kernel::exponential(start.eta, start.timescale),
        KernelFamily::PowerLaw => Kernel::power_law(start.eta, start.timescale, POWER_LAW_START_PHI),
    };
    HawkesParams::new(start.mu, kernel)
}

/// `AIC = 2k − 2 log L`.
pub(crate) fn aic_of(log_likelihood: f64, family: KernelFamily) -> f64 {
    2.0 * family.n_params() as f64 - 2.0 * log_likelihood
}

/// Fits the model family selected in `options`.
pub fn fit_hawkes(events: &EventSeries, options: &FitOptions) -> Result<FitResult> {
    fit_hawkes_with_starts(events, options, &[])
}

/// As [`fit_hawkes`], with additional starting points tried after the
/// built-in schedule. Starts of the wrong family are ignored.
///
/// The likelihood is conditioned on the first event: its `log λ` term is
/// dropped and the compensator runs from `t_1` to the horizon. This makes the
/// fit invariant to translating the event times.
pub fn fit_hawkes_with_starts(
    events: &EventSeries,
    options: &FitOptions,
    extra_starts: &[HawkesParams],
) -> Result<FitResult> {
    options.validate()?;
    let min = options.min_events.max(3);
    if events.len() < min {
        return Err(Error::TooFewEvents { got: events.len(), min });
    }
    let durations = window_durations(events);
    let first = durations[0];
    if durations.iter().all(|&d| (d - first).abs() <= 1e-12 * first) {
        return Err(Error::Degenerate("all inter-event durations are equal".into()));
    }

    let family = options.family;
    let mut initial: Vec<HawkesParams> = start_schedule(events, options)
        .iter()
        .map(|s| start_params(s, family))
        .collect::<Result<_>>()?;
    initial.extend(extra_starts.iter().filter(|p| p.kernel.family() == family).copied());

    let window = fit_window(events);
    let truncation = match family {
        KernelFamily::PowerLaw => options.powerlaw_truncation,
        KernelFamily::Exponential => None,
    };
    let opts = optim::OptimOptions {
        ftol: options.tol_loglik,
        xtol: options.tol_params,
        max_iter: options.max_iter,
        ..Default::default()
    };
    let span = events.horizon() - events.times()[0];
    let transform = Transform {
        family,
        eta_max: options.eta_max,
        tau_max: options.max_tau_fraction.map(|f| f * span),
    };
    let objective = |x: &[f64], grad: &mut [f64]| -> f64 {
        let (natural, jac) = transform.decode(x);
        if natural.iter().any(|v| !v.is_finite()) || natural[0] <= 0.0 || natural[2] <= 0.0 {
            return f64::INFINITY;
        }
        let Ok(params) = transform.params(&natural) else {
            return f64::INFINITY;
        };
        let mut g = vec![0.0; natural.len()];
        let ll = window_log_likelihood(&window, &params, truncation, Some(&mut g));
        for k in 0..g.len() {
            grad[k] = -g[k] * jac[k];
        }
        -ll
    };

    let outcomes: Vec<_> = initial
        .par_iter()
        .map(|p| optim::minimize(objective, &transform.encode(p), &opts))
        .collect();

    let best_start = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.f.is_finite())
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Degenerate("likelihood is not finite at any start".into()))?;
    let best = &outcomes[best_start];
    let (natural, _) = transform.decode(&best.x);
    let params = transform.params(&natural)?;
    let log_likelihood = -best.f;
    Ok(FitResult {
        family,
        params,
        log_likelihood,
        aic: aic_of(log_likelihood, family),
        converged: best.converged,
        iterations: best.iterations,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        eta_corrected: None,
        best_start,
        start_log_likelihoods: outcomes.iter().map(|o| o.f.is_finite().then_some(-o.f)).collect(),
        n_events: events.len(),
    })
}

/// Log-likelihood on the calibration window used by [`fit_hawkes`].
pub fn conditional_log_likelihood(events: &EventSeries, params: &HawkesParams) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(window_log_likelihood(&fit_window(events), params, None, None))
}
