//! Time-rescaling residuals, Kolmogorov–Smirnov uniformity tests and AIC
//! kernel comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_hawkes, fit_hawkes_with_starts, FitOptions, FitResult};
use crate::events::EventSeries;
use crate::hawkes::{HawkesParams, Kernel, KernelFamily};

/// Rescaled times `ξ_i = Λ(t_i)` and `U_i = 1 − e^{−(ξ_i − ξ_{i−1})}` with
/// `ξ_0 = 0`, so there are as many `U` as events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
}

/// Applies the compensator of `params` to the event times.
///
/// Increments `ξ_i − ξ_{i−1}` are accumulated directly rather than
/// differenced, which keeps them positive and accurate late in long series.
pub fn residual_process(events: &EventSeries, params: &HawkesParams) -> ResidualSeries {
    let times = events.times();
    let n = times.len();
    let mut xi = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut prev_t = 0.0;
    // Exponential kernel: Σ_{j ≤ i−1} e^{−(t_{i−1} − t_j)/τ}
    let mut state = 0.0;
    for i in 0..n {
        let t = times[i];
        let d = t - prev_t;
        let kernel_mass = if i == 0 {
            0.0
        } else {
            match params.kernel {
                Kernel::Exponential { eta, tau } => eta * -(-d / tau).exp_m1() * state,
                Kernel::PowerLaw { .. } => times[..i]
                    .iter()
                    .map(|&tj| params.kernel.survival(prev_t - tj) - params.kernel.survival(t - tj))
                    .sum::<f64>()
                    * params.kernel.eta(),
            }
        };
        if let Kernel::Exponential { tau, .. } = params.kernel {
            state = state * (-d / tau).exp() + 1.0;
        }
        let inc = params.mu * d + kernel_mass;
        total += inc;
        xi.push(total);
        u.push(-(-inc).exp_m1());
        prev_t = t;
    }
    ResidualSeries { xi, u }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks_statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub reject_at_5pct: bool,
    pub reject_at_10pct: bool,
}

impl GofReport {
    fn new(ks_statistic: f64, n: usize) -> Self {
        let p_value = kolmogorov_p_value(ks_statistic, n);
        Self { ks_statistic, p_value, n, reject_at_5pct: p_value < 0.05, reject_at_10pct: p_value < 0.10 }
    }
}

pub const KS_MIN_SAMPLE: usize = 10;

/// One-sample KS test of `u` against the uniform distribution on `[0, 1]`.
pub fn ks_uniform_test(u: &[f64]) -> Result<GofReport> {
    if let Some((i, &v)) = u.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::param(format!("value {v} at index {i} lies outside [0, 1]")));
    }
    ks_test(u, |x| x)
}

/// One-sample KS test of `sample` against a continuous CDF.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<GofReport> {
    let n = sample.len();
    if n < KS_MIN_SAMPLE {
        return Err(Error::TooFewEvents { got: n, min: KS_MIN_SAMPLE });
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::param("KS sample contains NaN"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / nf - f;
        let below = f - i as f64 / nf;
        d.max(above).max(below)
    });
    Ok(GofReport::new(d.clamp(0.0, 1.0), n))
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the effective scaling `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// `AIC = 2k − 2 log L`.
pub fn aic(log_likelihood: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * log_likelihood
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelComparison {
    pub exponential: Option<FitResult>,
    pub power_law: Option<FitResult>,
    pub aic_exponential: Option<f64>,
    pub aic_power_law: Option<f64>,
    pub selected: KernelFamily,
    pub warnings: Vec<String>,
}

impl KernelComparison {
    pub fn selected_fit(&self) -> &FitResult {
        let fit = match self.selected {
            KernelFamily::Exponential => &self.exponential,
            KernelFamily::PowerLaw => &self.power_law,
        };
        fit.as_ref().expect("selected family has a fit")
    }
}

/// Exponent of the power-law start derived from an exponential fit. For large
/// `φ`, `(1 + t/c)^{−φ} ≈ e^{−tφ/c}`, so `c = φτ̂` mimics the fitted kernel.
const WARM_START_PHI: f64 = 50.0;

/// Fits both kernel families with the same multi-start schedule and selects
/// the one with the smaller AIC (ties go to the exponential kernel, which has
/// fewer parameters). The power-law fit additionally starts from the
/// exponential optimum, mapped as described at [`WARM_START_PHI`].
pub fn compare_kernels(events: &EventSeries, options: &FitOptions) -> Result<KernelComparison> {
    let mut warnings = Vec::new();
    let exp_fit = fit_hawkes(events, &options.with_family(KernelFamily::Exponential));
    let warm: Vec<HawkesParams> = match &exp_fit {
        Ok(fit) => match fit.params.kernel {
            Kernel::Exponential { eta, tau } => HawkesParams::new(
                fit.params.mu,
                Kernel::power_law(eta.clamp(0.01, 0.95), WARM_START_PHI * tau, WARM_START_PHI),
            )
            .into_iter()
            .collect(),
            Kernel::PowerLaw { .. } => Vec::new(),
        },
        Err(_) => Vec::new(),
    };
    let pow_fit = fit_hawkes_with_starts(events, &options.with_family(KernelFamily::PowerLaw), &warm);

    let (exponential, power_law) = match (exp_fit, pow_fit) {
        (Err(e), Err(_)) => return Err(e),
        (Ok(a), Err(e)) => {
            warnings.push(format!("power-law fit failed: {e}"));
            (Some(a), None)
        }
        (Err(e), Ok(b)) => {
            warnings.push(format!("exponential fit failed: {e}"));
            (None, Some(b))
        }
        (Ok(a), Ok(b)) => (Some(a), Some(b)),
    };
    for fit in exponential.iter().chain(power_law.iter()) {
        if !fit.converged {
            warnings.push(format!("{} fit did not converge", fit.family));
        }
    }
    let aic_exponential = exponential.as_ref().map(|f| f.aic);
    let aic_power_law = power_law.as_ref().map(|f| f.aic);
    let selected = match (aic_exponential, aic_power_law) {
        (Some(a), Some(b)) if b < a => KernelFamily::PowerLaw,
        (None, Some(_)) => KernelFamily::PowerLaw,
        _ => KernelFamily::Exponential,
    };
    Ok(KernelComparison { exponential, power_law, aic_exponential, aic_power_law, selected, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub h_exp: f64,
    pub h_pow: f64,
    /// `|h̃_exp − h̃_pow| / h̃_exp`.
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub rows: Vec<ProfileRow>,
}

impl KernelProfile {
    /// `t,h_exp,h_pow,rel_diff`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,h_exp,h_pow,rel_diff\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.t, r.h_exp, r.h_pow, r.rel_diff);
        }
        out
    }
}

/// Normalized kernels `h̃ = h/η` of two fitted kernels on a common lag grid.
/// The first kernel is the reference for the relative difference.
pub fn kernel_distance_profile(exp_kernel: &Kernel, pow_kernel: &Kernel, t_grid: &[f64]) -> Result<KernelProfile> {
    exp_kernel.validate()?;
    pow_kernel.validate()?;
    if let Some(&t) = t_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::param(format!("lag grid must be finite and non-negative, got {t}")));
    }
    let rows = t_grid
        .iter()
        .map(|&t| {
            let h_exp = exp_kernel.density(t);
            let h_pow = pow_kernel.density(t);
            let rel_diff = if h_exp == h_pow { 0.0 } else { (h_exp - h_pow).abs() / h_exp };
            ProfileRow { t, h_exp, h_pow, rel_diff }
        })
        .collect();
    Ok(KernelProfile { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_computed_ks_statistic() {
        let mut u = vec![0.25, 0.5, 0.75];
        // Pad to the minimum sample size with a copy of the same ECDF pattern.
        assert!(ks_uniform_test(&u).is_err());
        u = (0..12).map(|i| [0.25, 0.5, 0.75][i % 3]).collect();
        let r = ks_uniform_test(&u).unwrap();
        assert_relative_eq!(r.ks_statistic, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn uniform_grid() {
        let n = 1000;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let r = ks_uniform_test(&u).unwrap();
        assert_relative_eq!(r.ks_statistic, 0.0005, epsilon = 1e-12);
        assert!(r.p_value > 0.999_999);
        assert!(!r.reject_at_5pct && !r.reject_at_10pct);
    }

    #[test]
    fn q_function_reference_values() {
        assert_eq!(kolmogorov_q(0.0), 1.0);
        // Standard critical values of the Kolmogorov distribution.
        assert_relative_eq!(kolmogorov_q(1.3580986), 0.05, epsilon = 1e-6);
        assert_relative_eq!(kolmogorov_q(1.2238478), 0.10, epsilon = 1e-6);
        assert!(kolmogorov_q(10.0) >= 0.0);
    }

    #[test]
    fn out_of_range_values_rejected() {
        let mut u: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        u[3] = 1.5;
        assert!(ks_uniform_test(&u).is_err());
    }

    #[test]
    fn aic_values() {
        assert_relative_eq!(aic(-343.0, 3), 692.0);
        assert_relative_eq!(aic(-491.4, 4), 990.8, epsilon = 1e-12);
        assert_eq!(aic(0.0, 0), 0.0);
    }

    #[test]
    fn poisson_residuals_are_linear() {
        let ev = EventSeries::new(vec![0.3, 1.1, 2.5, 4.0], 5.0).unwrap();
        let p = HawkesParams::exponential(2.0, 0.0, 1.0).unwrap();
        let r = residual_process(&ev, &p);
        for (xi, t) in r.xi.iter().zip(ev.times()) {
            assert_relative_eq!(*xi, 2.0 * t, max_relative = 1e-14);
        }
        assert_relative_eq!(r.u[0], 1.0 - (-0.6f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn residuals_match_compensator() {
        let times: Vec<f64> = (1..=80).map(|i| i as f64 * 0.8 + 0.4 * (i as f64).cos()).collect();
        let ev = EventSeries::from_times(times).unwrap();
        for p in [
            HawkesParams::exponential(0.6, 0.5, 1.7).unwrap(),
            HawkesParams::power_law(0.6, 0.5, 1.2, 2.8).unwrap(),
        ] {
            let r = residual_process(&ev, &p);
            for (xi, &t) in r.xi.iter().zip(ev.times()) {
                assert_relative_eq!(*xi, crate::hawkes::compensator(t, &ev, &p), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn identical_kernels_have_zero_distance() {
        let k = Kernel::exponential(0.3, 2.0);
        let prof = kernel_distance_profile(&k, &k, &[0.0, 1.0, 10.0]).unwrap();
        assert!(prof.rows.iter().all(|r| r.rel_diff == 0.0));
        assert!(prof.to_csv().starts_with("t,h_exp,h_pow,rel_diff\n"));
        assert!(kernel_distance_profile(&k, &k, &[-1.0]).is_err());
    }
}
