use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{HawkesParams, Kernel};
use crate::error::{Error, Result};
use crate::events::EventSeries;
use crate::rng::RngSpec;

/// Thinning aborts once the intensity exceeds this multiple of `μ`.
pub const DEFAULT_GUARD_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningOptions {
    pub guard_factor: f64,
}

impl Default for ThinningOptions {
    fn default() -> Self {
        Self { guard_factor: DEFAULT_GUARD_FACTOR }
    }
}

/// Ogata's modified thinning with the default explosion guard.
pub fn simulate_thinning(params: &HawkesParams, n_events: usize, rng: RngSpec) -> Result<EventSeries> {
    simulate_thinning_with(params, n_events, rng, ThinningOptions::default())
}

/// Draws exactly `n_events` events starting from an empty history at `t = 0`.
///
/// Between events the intensity is non-increasing for both kernels, so the
/// right-limit `λ(t⁺)` at the current time bounds it until the next candidate.
/// The bound is recomputed after every accepted or rejected candidate. The
/// returned horizon is the last event time.
pub fn simulate_thinning_with(
    params: &HawkesParams,
    n_events: usize,
    rng: RngSpec,
    options: ThinningOptions,
) -> Result<EventSeries> {
    if n_events == 0 {
        return Err(Error::param("n_events must be at least 1"));
    }
    let mut gen = rng.generator();
    let mu = params.mu;
    let guard = options.guard_factor * mu;
    let mut excitation = Excitation::new(params.kernel, n_events);
    let mut t = 0.0_f64;

    while excitation.times.len() < n_events {
        let bound = mu + excitation.at(t);
        if !(bound <= guard) {
            let partial = EventSeries::from_times(std::mem::take(&mut excitation.times))?;
            return Err(Error::SimulationAborted {
                reason: format!("intensity {bound:.3e} exceeded guard {guard:.3e}"),
                partial: Box::new(partial),
            });
        }
        let u: f64 = gen.sample(Open01);
        let candidate = t - u.ln() / bound;
        let lambda = mu + excitation.at(candidate);
        let v: f64 = gen.sample(Open01);
        let last = excitation.times.last().copied().unwrap_or(f64::NEG_INFINITY);
        if v * bound <= lambda && candidate > last {
            excitation.accept(candidate);
        }
        t = candidate;
    }
    EventSeries::from_times(excitation.times)
}

/// Kernel excitation state `Σ h(t − t_i)` as the simulation clock advances.
struct Excitation {
    kernel: Kernel,
    times: Vec<f64>,
    // Exponential kernel: Σ_i e^{−(t_state − t_i)/τ} at `t_state`, events at t_state included.
    state: f64,
    t_state: f64,
}

impl Excitation {
    fn new(kernel: Kernel, capacity: usize) -> Self {
        Self { kernel, times: Vec::with_capacity(capacity), state: 0.0, t_state: 0.0 }
    }

    /// Excitation at `t >= last event`, counting an event at `t` itself
    /// (the right limit).
    fn at(&self, t: f64) -> f64 {
        match self.kernel {
            Kernel::Exponential { eta, tau } => eta / tau * self.state * (-(t - self.t_state) / tau).exp(),
            Kernel::PowerLaw { eta, c, phi } => {
                let pref = eta * (phi - 1.0) / c;
                let mut sum = 0.0;
                for (j, &tj) in self.times.iter().enumerate().rev() {
                    let q = (-phi * ((t - tj) / c).ln_1p()).exp();
                    sum += q;
                    // All older terms are smaller; stop once they cannot matter.
                    if (j as f64) * q <= 1e-17 * sum {
                        break;
                    }
                }
                pref * sum
            }
        }
    }

    fn accept(&mut self, t: f64) {
        if let Kernel::Exponential { tau, .. } = self.kernel {
            self.state = self.state * (-(t - self.t_state) / tau).exp() + 1.0;
            self.t_state = t;
        }
        self.times.push(t);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchLabel {
    pub is_immigrant: bool,
    pub parent: Option<usize>,
    pub generation: u32,
}

/// Events of a cluster simulation together with their genealogy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingRealization {
    pub events: EventSeries,
    /// One label per event; `parent` indexes into `events`.
    pub labels: Vec<BranchLabel>,
}

impl BranchingRealization {
    pub fn n_descendants(&self) -> usize {
        self.labels.iter().filter(|l| !l.is_immigrant).count()
    }

    /// Fraction of events that are not immigrants.
    pub fn offspring_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.n_descendants() as f64 / self.labels.len() as f64
    }

    /// `index,time,parent,generation`; `parent` is empty for immigrants.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,time,parent,generation\n");
        for (i, (t, l)) in self.events.times().iter().zip(&self.labels).enumerate() {
            let parent = l.parent.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{i},{t},{parent},{}", l.generation);
        }
        out
    }
}

/// Cluster (branching) simulation on `[0, horizon]`.
///
/// Immigrants arrive as a Poisson process of rate `μ`; every event, immigrant
/// or not, independently spawns `Poisson(η)` children at lags drawn from the
/// normalized kernel. Children beyond the horizon are dropped together with
/// their would-be descendants.
pub fn simulate_branching(params: &HawkesParams, horizon: f64, rng: RngSpec) -> Result<BranchingRealization> {
    let eta = params.eta();
    if eta >= 1.0 {
        return Err(Error::param(format!("branching simulation requires eta < 1, got {eta}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    let mut gen = rng.generator();

    struct Raw {
        time: f64,
        parent: Option<usize>,
        generation: u32,
    }
    let mut raw: Vec<Raw> = Vec::new();
    let mut t = 0.0;
    loop {
        let u: f64 = gen.sample(Open01);
        t -= u.ln() / params.mu;
        if t > horizon {
            break;
        }
        raw.push(Raw { time: t, parent: None, generation: 0 });
    }

    let offspring = if eta > 0.0 {
        Some(Poisson::new(eta).map_err(|e| Error::param(e.to_string()))?)
    } else {
        None
    };
    let mut queue: VecDeque<usize> = (0..raw.len()).collect();
    while let Some(idx) = queue.pop_front() {
        let Some(dist) = offspring.as_ref() else { break };
        let n_children = dist.sample(&mut gen) as usize;
        let (parent_time, parent_gen) = (raw[idx].time, raw[idx].generation);
        for _ in 0..n_children {
            let u: f64 = gen.sample(Open01);
            let child_time = parent_time + params.kernel.sample_lag(u);
            if child_time <= horizon {
                raw.push(Raw { time: child_time, parent: Some(idx), generation: parent_gen + 1 });
                queue.push_back(raw.len() - 1);
            }
        }
    }

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].time.total_cmp(&raw[b].time));
    let mut rank = vec![0usize; raw.len()];
    for (pos, &idx) in order.iter().enumerate() {
        rank[idx] = pos;
    }
    let times: Vec<f64> = order.iter().map(|&i| raw[i].time).collect();
    let labels = order
        .iter()
        .map(|&i| BranchLabel {
            is_immigrant: raw[i].parent.is_none(),
            parent: raw[i].parent.map(|p| rank[p]),
            generation: raw[i].generation,
        })
        .collect();
    let events = EventSeries::new(times, horizon)?;
    Ok(BranchingRealization { events, labels })
}
