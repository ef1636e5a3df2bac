//! Dense BFGS with backtracking Armijo line search, sized for the handful of
//! parameters of a Hawkes model.

#[derive(Debug, Clone, Copy)]
pub(crate) struct OptimOptions {
    /// Absolute tolerance on the objective decrease.
    pub ftol: f64,
    /// Relative tolerance on the step, `|Δx_i| / (1 + |x_i|)`.
    pub xtol: f64,
    /// Absolute tolerance on the gradient sup-norm.
    pub gtol: f64,
    pub max_iter: usize,
    /// Consecutive iterations with decrease below `ftol` that count as converged.
    pub stall_iters: usize,
    /// Cap on the sup-norm of a single step in transformed coordinates.
    pub max_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { ftol: 1e-8, xtol: 1e-6, gtol: 1e-9, max_iter: 500, stall_iters: 5, max_step: 5.0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f`, which writes its gradient into the second argument and
/// returns the value (`+∞` or NaN marks an infeasible point).
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> OptimOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return OptimOutcome { x, f: f64::INFINITY, iterations: 0, evaluations, converged: false };
    }

    let mut h = identity(n);
    let mut h_is_identity = true;
    let mut first_update = true;
    let mut stall = 0;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    for iter in 1..=opts.max_iter {
        if sup_norm(&g) <= opts.gtol {
            return OptimOutcome { x, f: fx, iterations: iter - 1, evaluations, converged: true };
        }
        let mut p = mat_vec_neg(&h, &g);
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            h = identity(n);
            h_is_identity = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }

        let mut step = 1.0_f64.min(opts.max_step / sup_norm(&p).max(f64::MIN_POSITIVE));
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * p[i];
            }
            let f_trial = f(&x_new, &mut g_new);
            evaluations += 1;
            if f_trial.is_finite()
                && g_new.iter().all(|v| v.is_finite())
                && f_trial <= fx + 1e-4 * step * slope
            {
                accepted = Some(f_trial);
                break;
            }
            step *= 0.5;
        }

        let Some(f_next) = accepted else {
            if !h_is_identity {
                // Retry along steepest descent before giving up.
                h = identity(n);
                h_is_identity = true;
                continue;
            }
            let converged = sup_norm(&g) <= 1e-5 * (1.0 + fx.abs());
            return OptimOutcome { x, f: fx, iterations: iter, evaluations, converged };
        };

        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let rel_step = (0..n).map(|i| s[i].abs() / (1.0 + x[i].abs())).fold(0.0, f64::max);
        let decrease = fx - f_next;

        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_next;

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first_update {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
                first_update = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
            h_is_identity = false;
        }

        if decrease <= opts.ftol {
            stall += 1;
        } else {
            stall = 0;
        }
        if (decrease <= opts.ftol && rel_step <= opts.xtol) || stall >= opts.stall_iters {
            return OptimOutcome { x, f: fx, iterations: iter, evaluations, converged: true };
        }
    }
    let converged = sup_norm(&g) <= opts.gtol;
    OptimOutcome { x, f: fx, iterations: opts.max_iter, evaluations, converged }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_vec_neg(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| -dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            g[1] = 200.0 * (x[1] - x[0] * x[0]);
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let opts = OptimOptions { ftol: 1e-14, xtol: 1e-10, ..Default::default() };
        let out = minimize(f, &[-1.2, 1.0], &opts);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
    }

    #[test]
    fn quadratic_exact() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 8.0 * (x[1] + 1.0);
            g[2] = 0.2 * x[2];
            (x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2) + 0.1 * x[2] * x[2]
        };
        let out = minimize(f, &[0.0, 0.0, 4.0], &OptimOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 3.0).abs() < 1e-5);
        assert!((out.x[1] + 1.0).abs() < 1e-5);
        assert!(out.x[2].abs() < 1e-3);
    }

    #[test]
    fn infeasible_start_reports_failure() {
        let out = minimize(|_, _| f64::INFINITY, &[0.0], &OptimOptions::default());
        assert!(!out.converged);
    }
}
