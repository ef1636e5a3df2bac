//! Linear Hawkes processes with constant background rate.
//!
//! The conditional intensity is `λ(t) = μ + Σ_{t_i < t} h(t − t_i)` with
//! either an exponential kernel `h(t) = (η/τ)·e^{−t/τ}` or a power-law
//! (modified Omori) kernel `h(t) = η(φ−1)c^{φ−1}·(t + c)^{−φ}`. Both are
//! parametrized so that `∫₀^∞ h = η`, the branching ratio.

mod likelihood;
mod simulate;

pub use likelihood::{compensator, intensity_at, log_likelihood, log_likelihood_truncated};
pub(crate) use likelihood::{window_log_likelihood, Window};
pub use simulate::{
    simulate_branching, simulate_thinning, simulate_thinning_with, BranchLabel,
    BranchingRealization, ThinningOptions, DEFAULT_GUARD_FACTOR,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on `η` accepted by [`HawkesParams::new`].
pub const DEFAULT_ETA_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    PowerLaw,
}

impl KernelFamily {
    /// Number of free parameters of the full Hawkes model, background included.
    pub fn n_params(self) -> usize {
        match self {
            KernelFamily::Exponential => 3,
            KernelFamily::PowerLaw => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::PowerLaw => "power_law",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(KernelFamily::Exponential),
            "power_law" | "power-law" | "pow" => Ok(KernelFamily::PowerLaw),
            other => Err(Error::param(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Memory kernel, normalized so that its integral is `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Kernel {
    Exponential { eta: f64, tau: f64 },
    PowerLaw { eta: f64, c: f64, phi: f64 },
}

impl Kernel {
    pub fn exponential(eta: f64, tau: f64) -> Self {
        Kernel::Exponential { eta, tau }
    }

    pub fn power_law(eta: f64, c: f64, phi: f64) -> Self {
        Kernel::PowerLaw { eta, c, phi }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::Exponential { .. } => KernelFamily::Exponential,
            Kernel::PowerLaw { .. } => KernelFamily::PowerLaw,
        }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            Kernel::Exponential { eta, .. } | Kernel::PowerLaw { eta, .. } => eta,
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        match self {
            Kernel::Exponential { tau, .. } => Kernel::Exponential { eta, tau },
            Kernel::PowerLaw { c, phi, .. } => Kernel::PowerLaw { eta, c, phi },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta();
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::param(format!("kernel eta must be finite and >= 0, got {eta}")));
        }
        match *self {
            Kernel::Exponential { tau, .. } => {
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::param(format!("tau must be positive, got {tau}")));
                }
            }
            Kernel::PowerLaw { c, phi, .. } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::param(format!("c must be positive, got {c}")));
                }
                if !(phi.is_finite() && phi > 1.0) {
                    return Err(Error::param(format!("phi must exceed 1, got {phi}")));
                }
            }
        }
        Ok(())
    }

    /// `h(lag)`; zero for negative lags.
    pub fn value(&self, lag: f64) -> f64 {
        self.eta() * self.density(lag)
    }

    /// Normalized kernel `h(lag)/η`, a probability density on `[0, ∞)`.
    pub fn density(&self, lag: f64) -> f64 {
        if lag < 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { tau, .. } => (-lag / tau).exp() / tau,
            // (φ−1)c^{φ−1}(lag+c)^{−φ} written to avoid overflowing c^{φ−1} and
            // to stay accurate when c and φ are both large.
            Kernel::PowerLaw { c, phi, .. } => (phi - 1.0) / c * (-phi * (lag / c).ln_1p()).exp(),
        }
    }

    /// `∫₀^s h(u) du`; zero for `s <= 0`.
    pub fn integral(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let log_survival = match *self {
            Kernel::Exponential { tau, .. } => -s / tau,
            Kernel::PowerLaw { c, phi, .. } => -(phi - 1.0) * (s / c).ln_1p(),
        };
        self.eta() * -log_survival.exp_m1()
    }

    /// Tail mass of the normalized kernel beyond `s >= 0`.
    pub fn survival(&self, s: f64) -> f64 {
        match *self {
            Kernel::Exponential { tau, .. } => (-s / tau).exp(),
            Kernel::PowerLaw { c, phi, .. } => (-(phi - 1.0) * (s / c).ln_1p()).exp(),
        }
    }

    /// Inverse-CDF draw from the normalized kernel, `u` uniform on (0, 1).
    pub fn sample_lag(&self, u: f64) -> f64 {
        match *self {
            Kernel::Exponential { tau, .. } => -tau * u.ln(),
            Kernel::PowerLaw { c, phi, .. } => c * (-u.ln() / (phi - 1.0)).exp_m1(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: f64,
    pub kernel: Kernel,
}

impl HawkesParams {
    pub fn new(mu: f64, kernel: Kernel) -> Result<Self> {
        Self::with_eta_max(mu, kernel, DEFAULT_ETA_MAX)
    }

    /// Same as [`Self::new`] with a custom upper bound on `η`, e.g. to study
    /// explosive regimes with the thinning simulator.
    pub fn with_eta_max(mu: f64, kernel: Kernel, eta_max: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param(format!("mu must be positive, got {mu}")));
        }
        kernel.validate()?;
        if kernel.eta() > eta_max {
            return Err(Error::param(format!(
                "eta {} exceeds the configured maximum {eta_max}",
                kernel.eta()
            )));
        }
        Ok(Self { mu, kernel })
    }

    pub fn exponential(mu: f64, eta: f64, tau: f64) -> Result<Self> {
        Self::new(mu, Kernel::exponential(eta, tau))
    }

    pub fn power_law(mu: f64, eta: f64, c: f64, phi: f64) -> Result<Self> {
        Self::new(mu, Kernel::power_law(eta, c, phi))
    }

    pub fn eta(&self) -> f64 {
        self.kernel.eta()
    }

    pub fn is_stationary(&self) -> bool {
        self.kernel.eta() < 1.0
    }

    /// Stationary event rate `μ/(1−η)`, defined for `η < 1`.
    pub fn stationary_rate(&self) -> Option<f64> {
        self.is_stationary().then(|| self.mu / (1.0 - self.eta()))
    }

    /// Natural parameter vector: `[μ, η, τ]` or `[μ, η, c, φ]`.
    pub fn to_vec(&self) -> Vec<f64> {
        match self.kernel {
            Kernel::Exponential { eta, tau } => vec![self.mu, eta, tau],
            Kernel::PowerLaw { eta, c, phi } => vec![self.mu, eta, c, phi],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_value_at_origin() {
        assert_relative_eq!(Kernel::exponential(0.5, 2.0).value(0.0), 0.25);
    }

    #[test]
    fn causality() {
        assert_eq!(Kernel::exponential(0.5, 2.0).value(-1.0), 0.0);
        assert_eq!(Kernel::power_law(0.5, 1.0, 2.5).value(-1.0), 0.0);
    }

    #[test]
    fn power_law_matches_unsimplified_form() {
        let (eta, c, phi) = (0.4, 0.7_f64, 2.3);
        let k = eta * (phi - 1.0) * c.powf(phi - 1.0);
        for lag in [0.0, 0.1, 1.0, 10.0] {
            assert_relative_eq!(
                Kernel::power_law(eta, c, phi).value(lag),
                k * (lag + c).powf(-phi),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn power_law_with_huge_c_does_not_overflow() {
        let k = Kernel::power_law(0.23, 816.41, 105.17);
        let v = k.value(10.0);
        assert!(v.is_finite() && v > 0.0);
        assert!(k.integral(1e9).is_finite());
    }

    #[test]
    fn sample_lag_inverts_survival() {
        for k in [Kernel::exponential(0.3, 1.7), Kernel::power_law(0.3, 0.5, 3.2)] {
            for u in [0.01, 0.3, 0.9] {
                assert_relative_eq!(k.survival(k.sample_lag(u)), u, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(HawkesParams::exponential(0.0, 0.5, 1.0).is_err());
        assert!(HawkesParams::exponential(1.0, -0.1, 1.0).is_err());
        assert!(HawkesParams::exponential(1.0, 1.2, 1.0).is_err());
        assert!(HawkesParams::exponential(1.0, 0.5, 0.0).is_err());
        assert!(HawkesParams::power_law(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(HawkesParams::with_eta_max(1.0, Kernel::exponential(1.2, 1.0), 2.0).is_ok());
        let p = HawkesParams::exponential(1.0, 0.5, 1.0).unwrap();
        assert_eq!(p.stationary_rate(), Some(2.0));
        assert!(HawkesParams::exponential(1.0, 1.0, 1.0).unwrap().stationary_rate().is_none());
    }

    #[test]
    fn serde_shape() {
        let p = HawkesParams::power_law(1.0, 0.5, 2.0, 3.0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains(r#""family":"power_law""#), "{s}");
        let back: HawkesParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
