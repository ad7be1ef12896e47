//! Damped Gauss–Newton least squares with box constraints.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Relative parameter-step tolerance.
    pub x_tol: f64,
    /// Relative cost-decrease tolerance.
    pub f_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 3.0,
            x_tol: 1e-12,
            f_tol: 1e-15,
        }
    }
}

/// Result of a least-squares run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `½‖r‖²` at the solution.
    pub cost: f64,
    pub residuals: Vec<f64>,
    /// Jacobian at the solution, row-major `m × n`.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    /// False when the damping grew without bound before a tolerance was met.
    pub converged: bool,
}

/// A residual function together with typical parameter scales (used for
/// finite-difference steps) and bounds.
pub struct LmProblem<'a> {
    pub residual: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub scale: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Parameters held at their initial value.
    pub fixed: Vec<bool>,
}

impl LmProblem<'_> {
    fn project(&self, p: &mut [f64]) {
        for j in 0..p.len() {
            p[j] = p[j].clamp(self.lower[j], self.upper[j]);
        }
    }

    fn cost(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let r = (self.residual)(p);
        let c = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        (if c.is_finite() { c } else { f64::INFINITY }, r)
    }

    /// Central-difference Jacobian; fixed parameters get zero columns.
    fn jacobian(&self, p: &[f64], m: usize) -> DMatrix<f64> {
        let n = p.len();
        let mut j = DMatrix::zeros(m, n);
        for k in 0..n {
            if self.fixed[k] {
                continue;
            }
            let h = 1e-7 * p[k].abs().max(self.scale[k]);
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[k] += h;
            b[k] -= h;
            let ra = (self.residual)(&a);
            let rb = (self.residual)(&b);
            for i in 0..m {
                j[(i, k)] = (ra[i] - rb[i]) / (2.0 * h);
            }
        }
        j
    }
}

/// Minimizes `½‖r(p)‖²` from `p0`. A step is accepted only if the cost
/// decreases; the damping is multiplied by `damping_up` after a rejected
/// step and divided by `damping_down` after an accepted one.
pub fn levenberg_marquardt(problem: &LmProblem<'_>, p0: &[f64], opts: &LmOptions) -> Result<LmOutcome> {
    let n = p0.len();
    if problem.scale.len() != n || problem.lower.len() != n || problem.upper.len() != n || problem.fixed.len() != n {
        return Err(Error::Invalid("parameter metadata length mismatch".into()));
    }
    let mut p = p0.to_vec();
    problem.project(&mut p);
    let (mut cost, mut r) = problem.cost(&p);
    if !cost.is_finite() {
        return Err(Error::NonFinite("initial residuals"));
    }
    let m = r.len();
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = problem.jacobian(&p, m);

    while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let max_diag = (0..n).map(|k| a[(k, k)]).fold(0.0, f64::max);
        if max_diag == 0.0 {
            converged = true;
            break;
        }
        let floor = 1e-12 * max_diag;

        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = a.clone();
            for k in 0..n {
                if problem.fixed[k] {
                    for q in 0..n {
                        damped[(k, q)] = 0.0;
                        damped[(q, k)] = 0.0;
                    }
                    damped[(k, k)] = 1.0;
                } else {
                    damped[(k, k)] += lambda * (a[(k, k)] + floor);
                }
            }
            let mut rhs = -g.clone();
            for k in 0..n {
                if problem.fixed[k] {
                    rhs[k] = 0.0;
                }
            }
            let step = damped.cholesky().ok_or(Error::RankDeficient)?.solve(&rhs);
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            problem.project(&mut trial);
            let (trial_cost, trial_r) = problem.cost(&trial);
            if trial_cost < cost {
                let small_step = (0..n).all(|k| {
                    (trial[k] - p[k]).abs() <= opts.x_tol * (p[k].abs() + 1e-6 * problem.scale[k])
                });
                let small_gain = cost - trial_cost <= opts.f_tol * cost;
                p = trial;
                cost = trial_cost;
                r = trial_r;
                lambda = (lambda / opts.damping_down).max(1e-15);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= opts.damping_up;
        }
        if !accepted {
            let grad_small = (0..n)
                .filter(|&k| !problem.fixed[k])
                .all(|k| g[k].abs() <= 1e-8 * (a[(k, k)] * 2.0 * cost).sqrt().max(1e-300));
            converged = grad_small || lambda >= 1e20;
            break;
        }
        jac = problem.jacobian(&p, m);
        if converged {
            break;
        }
    }
    if !converged && iterations >= opts.max_iter {
        return Err(Error::NoConvergence(iterations));
    }
    Ok(LmOutcome {
        params: p,
        cost,
        residuals: r,
        jacobian: jac,
        iterations,
        converged,
    })
}

/// Parameter standard deviations from `s²·(JᵀJ)⁻¹` with
/// `s² = ‖r‖²/(m − n_free)`. Parameters with a vanishing Jacobian column
/// (or fixed ones) are reported as unidentifiable with infinite sigma.
pub fn covariance_sigmas(out: &LmOutcome, fixed: &[bool]) -> (Vec<f64>, Vec<bool>) {
    let n = out.params.len();
    let m = out.residuals.len();
    let a = out.jacobian.transpose() * &out.jacobian;
    let max_diag = (0..n).map(|k| a[(k, k)]).fold(0.0, f64::max);
    let free: Vec<usize> = (0..n)
        .filter(|&k| !fixed[k] && a[(k, k)] > 1e-20 * max_diag && a[(k, k)] > 0.0)
        .collect();
    let mut sigma = vec![f64::INFINITY; n];
    let mut ident = vec![false; n];
    for k in 0..n {
        if fixed[k] {
            sigma[k] = 0.0;
        }
    }
    if free.is_empty() {
        return (sigma, ident);
    }
    let dof = m.saturating_sub(free.len()).max(1) as f64;
    let s2 = 2.0 * out.cost / dof;
    let sub = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
    let inv = match sub.clone().cholesky() {
        Some(c) => Some(c.inverse()),
        None => sub.pseudo_inverse(1e-14 * max_diag).ok(),
    };
    if let Some(inv) = inv {
        for (i, &k) in free.iter().enumerate() {
            let v = s2 * inv[(i, i)];
            sigma[k] = v.max(0.0).sqrt();
            ident[k] = true;
        }
    }
    (sigma, ident)
}
