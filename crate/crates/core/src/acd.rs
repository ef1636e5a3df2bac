//! Exponential ACD(1,1): `δt_i = ψ_i ε_i`, `ψ_i = ω + α δt_{i−1} + β ψ_{i−1}`,
//! with `ε_i` iid unit-mean exponential.

use std::fmt::Write as _;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSeries;
use crate::rng::RngSpec;

/// Simulation aborts if `ψ` exceeds this multiple of `ω`.
pub const PSI_OVERFLOW_FACTOR: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcdParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl AcdParams {
    /// Accepts `α + β ≤ 1`; the critical point `ζ = 1` is simulable but not
    /// stationary.
    pub fn new(omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::param(format!("omega must be positive, got {omega}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta >= 0.0) {
            return Err(Error::param(format!("alpha and beta must be >= 0, got ({alpha}, {beta})")));
        }
        let p = Self { omega, alpha, beta };
        if p.zeta() > 1.0 + 1e-12 {
            return Err(Error::param(format!("alpha + beta = {} exceeds 1", p.zeta())));
        }
        Ok(p)
    }

    /// Combined parameter `ζ = α + β`.
    pub fn zeta(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn is_stationary(&self) -> bool {
        self.zeta() < 1.0
    }

    /// Stationary mean duration `ω/(1−ζ)`.
    pub fn expected_duration(&self) -> Result<f64> {
        if !self.is_stationary() {
            return Err(Error::param(format!(
                "mean duration diverges for zeta = {} >= 1",
                self.zeta()
            )));
        }
        Ok(self.omega / (1.0 - self.zeta()))
    }

    /// `ψ` used for the first event: the stationary mean, or `ω` at `ζ = 1`.
    pub fn initial_psi(&self) -> f64 {
        self.expected_duration().unwrap_or(self.omega)
    }

    /// `ψ_{i+1}` from the previous duration and conditional duration.
    pub fn next_psi(&self, duration: f64, psi: f64) -> f64 {
        self.omega + self.alpha * duration + self.beta * psi
    }
}

/// Free-function form of [`AcdParams::expected_duration`].
pub fn expected_duration(params: &AcdParams) -> Result<f64> {
    params.expected_duration()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcdRealization {
    pub events: EventSeries,
    /// `ψ_i` aligned with the durations `δt_i` (same length as `events`).
    pub psi: Vec<f64>,
}

impl AcdRealization {
    pub fn durations(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.events
            .times()
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    /// Largest violation of the `ψ` recursion over the realization.
    pub fn recursion_residual(&self, params: &AcdParams) -> f64 {
        let d = self.durations();
        (1..self.psi.len())
            .map(|i| (self.psi[i] - params.next_psi(d[i - 1], self.psi[i - 1])).abs() / self.psi[i])
            .fold(0.0, f64::max)
    }

    /// `index,time,duration,psi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,time,duration,psi\n");
        for (i, ((t, d), p)) in self.events.times().iter().zip(self.durations()).zip(&self.psi).enumerate() {
            let _ = writeln!(out, "{i},{t},{d},{p}");
        }
        out
    }
}

/// Recursive simulation of `n_events` ACD(1,1) durations from `t = 0`.
///
/// Innovations are `−ln u` with `u` uniform on the open interval (0, 1). A
/// duration too small to advance the clock in floating point is redrawn, so
/// event times are strictly increasing.
pub fn simulate_acd(params: &AcdParams, n_events: usize, rng: RngSpec) -> Result<AcdRealization> {
    if n_events == 0 {
        return Err(Error::param("n_events must be at least 1"));
    }
    let mut gen = rng.generator();
    let limit = PSI_OVERFLOW_FACTOR * params.omega;
    let mut times = Vec::with_capacity(n_events);
    let mut psis = Vec::with_capacity(n_events);
    let mut t = 0.0_f64;
    let mut psi = params.initial_psi();
    let mut last_duration = 0.0;
    for i in 0..n_events {
        if i > 0 {
            psi = params.next_psi(last_duration, psi);
        }
        if !(psi <= limit) {
            return Err(Error::SimulationAborted {
                reason: format!("psi {psi:.3e} exceeded {limit:.3e}"),
                partial: Box::new(EventSeries::from_times(times)?),
            });
        }
        let next = loop {
            let u: f64 = gen.sample(Open01);
            let candidate = t + psi * -u.ln();
            if candidate > t {
                break candidate;
            }
        };
        last_duration = next - t;
        t = next;
        times.push(t);
        psis.push(psi);
    }
    Ok(AcdRealization { events: EventSeries::from_times(times)?, psi: psis })
}

/// `λ(t) = 1/ψ_{N(t)+1}` with `N(t)` the number of events at or before `t`.
/// Constant between events.
pub fn acd_intensity_at(t: f64, realization: &AcdRealization, params: &AcdParams) -> f64 {
    let times = realization.events.times();
    let n = times.partition_point(|&ti| ti <= t);
    let psi_next = if n < realization.psi.len() {
        realization.psi[n]
    } else {
        let last = times.len() - 1;
        let prev = if last == 0 { 0.0 } else { times[last - 1] };
        params.next_psi(times[last] - prev, realization.psi[last])
    };
    1.0 / psi_next
}
