use super::{HawkesParams, Kernel};
use crate::events::EventSeries;

/// `λ(t|F) = μ + Σ_{t_i < t} h(t − t_i)`.
pub fn intensity_at(t: f64, events: &EventSeries, params: &HawkesParams) -> f64 {
    let past = events.times().partition_point(|&ti| ti < t);
    let excitation: f64 = events.times()[..past].iter().map(|&ti| params.kernel.value(t - ti)).sum();
    params.mu + excitation
}

/// `Λ(t) = μt + Σ_{t_i < t} H(t − t_i)` with the closed-form kernel integral.
pub fn compensator(t: f64, events: &EventSeries, params: &HawkesParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let past = events.times().partition_point(|&ti| ti < t);
    let kernel_mass: f64 = events.times()[..past].iter().map(|&ti| params.kernel.integral(t - ti)).sum();
    params.mu * t + kernel_mass
}

/// `log L = Σ_i log λ(t_i) − Λ(T)` on the observation window `[0, T]`.
///
/// The exponential kernel uses the Markov recursion and runs in O(N); the
/// power-law kernel sums all pairs.
pub fn log_likelihood(events: &EventSeries, params: &HawkesParams) -> f64 {
    let window = Window { times: events.times(), start: 0.0, end: events.horizon(), skip: 0 };
    window_log_likelihood(&window, params, None, None)
}

/// Power-law likelihood with the pair sum cut once the remaining terms are
/// provably below `tolerance · μ` in every intensity. Identical to
/// [`log_likelihood`] for the exponential kernel.
pub fn log_likelihood_truncated(events: &EventSeries, params: &HawkesParams, tolerance: f64) -> f64 {
    let window = Window { times: events.times(), start: 0.0, end: events.horizon(), skip: 0 };
    window_log_likelihood(&window, params, Some(tolerance), None)
}

/// Likelihood window: events `times[skip..]` contribute `log λ` terms, all
/// events act as history, and the compensator runs over `[start, end]`.
/// Every event time must be `>= start`.
pub(crate) struct Window<'a> {
    pub times: &'a [f64],
    pub start: f64,
    pub end: f64,
    pub skip: usize,
}

/// Log-likelihood and, optionally, its gradient with respect to the natural
/// parameters `[μ, η, τ]` or `[μ, η, c, φ]`.
pub(crate) fn window_log_likelihood(
    window: &Window<'_>,
    params: &HawkesParams,
    truncation: Option<f64>,
    grad: Option<&mut [f64]>,
) -> f64 {
    match params.kernel {
        Kernel::Exponential { eta, tau } => exponential(window, params.mu, eta, tau, grad),
        Kernel::PowerLaw { eta, c, phi } => power_law(window, params.mu, eta, c, phi, truncation, grad),
    }
}

fn exponential(w: &Window<'_>, mu: f64, eta: f64, tau: f64, grad: Option<&mut [f64]>) -> f64 {
    let times = w.times;
    // a = Σ_{j<i} e^{−(t_i−t_j)/τ},  b = Σ_{j<i} (t_i−t_j) e^{−(t_i−t_j)/τ}
    let (mut a, mut b) = (0.0_f64, 0.0_f64);
    let mut sum_log = 0.0;
    let mut g = [0.0_f64; 3];
    let scale = eta / tau;
    for i in 0..times.len() {
        if i > 0 {
            let d = times[i] - times[i - 1];
            let e = (-d / tau).exp();
            b = e * (b + d * (1.0 + a));
            a = e * (1.0 + a);
        }
        if i < w.skip {
            continue;
        }
        let lambda = mu + scale * a;
        sum_log += lambda.ln();
        g[0] += 1.0 / lambda;
        g[1] += a / tau / lambda;
        g[2] += scale / tau * (b / tau - a) / lambda;
    }

    let mut mass = 0.0;
    let mut dmass_dtau = 0.0;
    for &t in times {
        let r = w.end - t;
        let e = (-r / tau).exp();
        mass -= (-r / tau).exp_m1();
        dmass_dtau -= e * r / (tau * tau);
    }
    let span = w.end - w.start;
    let value = sum_log - mu * span - eta * mass;

    if let Some(out) = grad {
        out[0] = g[0] - span;
        out[1] = g[1] - mass;
        out[2] = g[2] - eta * dmass_dtau;
    }
    value
}

fn power_law(
    w: &Window<'_>,
    mu: f64,
    eta: f64,
    c: f64,
    phi: f64,
    truncation: Option<f64>,
    grad: Option<&mut [f64]>,
) -> f64 {
    let times = w.times;
    let pref = (phi - 1.0) / c;
    let max_log_ratio = times
        .first()
        .map(|&t0| ((w.end - t0 + c) / c).ln())
        .unwrap_or(0.0);
    let cutoff = truncation.map(|tol| tol * mu / (pref * (1.0 + max_log_ratio)));

    let mut sum_log = 0.0;
    let mut g = [0.0_f64; 4];
    for i in w.skip..times.len() {
        let ti = times[i];
        // q = (c/x)^φ, x = t_i − t_j + c
        let (mut q0, mut q1, mut q2) = (0.0_f64, 0.0_f64, 0.0_f64);
        for j in (0..i).rev() {
            let lag = ti - times[j];
            let x = lag + c;
            let l = -(lag / c).ln_1p();
            let q = (phi * l).exp();
            q0 += q;
            q1 += q / x;
            q2 += q * l;
            if let Some(cut) = cutoff {
                // Remaining j terms are each no larger than this one.
                if (j as f64) * q <= cut {
                    break;
                }
            }
        }
        let gi = pref * q0;
        let lambda = mu + eta * gi;
        sum_log += lambda.ln();
        g[0] += 1.0 / lambda;
        g[1] += gi / lambda;
        g[2] += eta * pref * (pref * q0 - phi * q1) / lambda;
        g[3] += eta * (q0 / c + pref * q2) / lambda;
    }

    // Compensator: η Σ (1 − G_i), G_i = (c/(R_i+c))^{φ−1}
    let (mut mass, mut dmass_dc, mut dmass_dphi) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &t in times {
        let r = w.end - t;
        let l = -(r / c).ln_1p();
        let big_g = ((phi - 1.0) * l).exp();
        mass -= ((phi - 1.0) * l).exp_m1();
        dmass_dc -= big_g * (phi - 1.0) * r / (c * (r + c));
        dmass_dphi -= big_g * l;
    }
    let span = w.end - w.start;
    let value = sum_log - mu * span - eta * mass;

    if let Some(out) = grad {
        out[0] = g[0] - span;
        out[1] = g[1] - mass;
        out[2] = g[2] - eta * dmass_dc;
        out[3] = g[3] - eta * dmass_dphi;
    }
    value
}
