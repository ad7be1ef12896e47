//! Decaying multi-cosine and stretched-exponential models.

use super::lm::{covariance_sigmas, levenberg_marquardt, LmOptions, LmOutcome, LmProblem};
use super::{periodogram, FitParam, FitResult};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{PI, TAU};

/// Options for [`fit_decaying_cosines`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CosineFitOptions {
    /// Initial frequencies (Hz); taken from periodogram peaks when absent.
    pub hints: Option<Vec<f64>>,
    /// Fit the stretch exponent instead of holding it at 1.
    pub free_beta: bool,
}

fn check_xy(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Invalid("x and y lengths differ".into()));
    }
    if x.len() < 3 {
        return Err(Error::EmptyGrid("need at least three samples"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit input"));
    }
    let s = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(s > 0.0) {
        return Err(Error::Invalid("abscissa must not be identically zero".into()));
    }
    Ok(s)
}

fn envelope(u: f64, t: f64, beta: f64) -> f64 {
    (-(u.abs() / t).powf(beta)).exp()
}

fn wrap_phase(c: f64) -> f64 {
    let w = (c + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Linear least-squares amplitudes and phases at fixed frequencies and
/// envelope; returns `(offset, [(a, c)], cost)`.
fn linear_init(u: &[f64], y: &[f64], freqs: &[f64], t: f64, beta: f64) -> (f64, Vec<(f64, f64)>, f64) {
    let m = u.len();
    let n = 2 * freqs.len() + 1;
    let design = DMatrix::from_fn(m, n, |i, j| {
        if j == n - 1 {
            return 1.0;
        }
        let e = envelope(u[i], t, beta);
        let arg = TAU * freqs[j / 2] * u[i];
        if j % 2 == 0 {
            e * arg.cos()
        } else {
            e * arg.sin()
        }
    });
    let yv = DVector::from_column_slice(y);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&yv, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(n));
    let resid = &design * &coef - &yv;
    let comps = (0..freqs.len())
        .map(|k| {
            let (a, b) = (coef[2 * k], coef[2 * k + 1]);
            (a.hypot(b), (-b).atan2(a))
        })
        .collect();
    (coef[n - 1], comps, resid.norm_squared())
}

fn build_params(names: &[String], out: &LmOutcome, fixed: &[bool], unscale: &[f64]) -> Vec<FitParam> {
    let (sigma, ident) = covariance_sigmas(out, fixed);
    names
        .iter()
        .enumerate()
        .map(|(k, name)| FitParam {
            name: name.clone(),
            value: out.params[k] * unscale[k],
            sigma: sigma[k] * unscale[k].abs(),
            identifiable: ident[k] || fixed[k],
        })
        .collect()
}

/// Fits `e^(−(t/T)^β) · Σₖ aₖ cos(2π fₖ t + cₖ) + offset` with a shared
/// envelope. Parameters are reported as `decay_time`, `beta`, `offset`,
/// then `amp_k`, `freq_k`, `phase_k` ordered by increasing frequency.
pub fn fit_decaying_cosines(x: &[f64], y: &[f64], n_components: usize, opts: &CosineFitOptions) -> Result<FitResult> {
    if !(1..=3).contains(&n_components) {
        return Err(Error::Invalid("between one and three components are supported".into()));
    }
    let s = check_xy(x, y)?;
    let u: Vec<f64> = x.iter().map(|v| v / s).collect();

    let mut warnings = Vec::new();
    let freqs: Vec<f64> = match &opts.hints {
        Some(h) => {
            if h.len() != n_components {
                return Err(Error::Invalid("one frequency hint per component is required".into()));
            }
            h.iter().map(|f| f * s).collect()
        }
        None => {
            let pg = periodogram(x, y)?;
            let mut f: Vec<f64> = pg.peaks().iter().take(n_components).map(|p| p.freq * s).collect();
            let df = if pg.freq.len() > 1 { pg.freq[1] * s } else { 1.0 };
            while f.len() < n_components {
                warnings.push("fewer spectral peaks than components".to_string());
                f.push(df * (f.len() + 1) as f64);
            }
            f
        }
    };

    let (t0, (off0, comps0, _)) = [0.3, 1.0, 3.0, 10.0, 100.0]
        .iter()
        .map(|&t| (t, linear_init(&u, y, &freqs, t, 1.0)))
        .min_by(|a, b| a.1 .2.total_cmp(&b.1 .2))
        .unwrap();

    let mut p0 = vec![t0, 1.0, off0];
    for (k, &(a, c)) in comps0.iter().enumerate() {
        p0.extend([a, freqs[k], c]);
    }
    let np = p0.len();
    let residual = |p: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(y)
            .map(|(&ui, &yi)| {
                let e = envelope(ui, p[0], p[1]);
                let mut v = p[2];
                for k in 0..n_components {
                    let b = 3 + 3 * k;
                    v += e * p[b] * (TAU * p[b + 1] * ui + p[b + 2]).cos();
                }
                v - yi
            })
            .collect()
    };
    let yscale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut scale = vec![1.0, 1.0, yscale];
    let mut lower = vec![1e-3, 0.3, f64::NEG_INFINITY];
    let mut upper = vec![1e6, 4.0, f64::INFINITY];
    for _ in 0..n_components {
        scale.extend([yscale, 1.0, 1.0]);
        lower.extend([0.0, 0.0, f64::NEG_INFINITY]);
        upper.extend([f64::INFINITY, f64::INFINITY, f64::INFINITY]);
    }
    let mut fixed = vec![false; np];
    fixed[1] = !opts.free_beta;
    let problem = LmProblem {
        residual: &residual,
        scale,
        lower,
        upper,
        fixed: fixed.clone(),
    };
    let out = levenberg_marquardt(&problem, &p0, &LmOptions::default())?;

    let mut order: Vec<usize> = (0..n_components).collect();
    order.sort_by(|&a, &b| out.params[4 + 3 * a].total_cmp(&out.params[4 + 3 * b]));
    let mut names = vec!["decay_time".to_string(), "beta".to_string(), "offset".to_string()];
    let mut unscale = vec![s, 1.0, 1.0];
    for k in 0..n_components {
        names.extend([format!("amp_{}", k + 1), format!("freq_{}", k + 1), format!("phase_{}", k + 1)]);
        unscale.extend([1.0, 1.0 / s, 1.0]);
    }
    let mut sorted = out.clone();
    for (slot, &k) in order.iter().enumerate() {
        for q in 0..3 {
            sorted.params[3 + 3 * slot + q] = out.params[3 + 3 * k + q];
            for i in 0..out.jacobian.nrows() {
                sorted.jacobian[(i, 3 + 3 * slot + q)] = out.jacobian[(i, 3 + 3 * k + q)];
            }
        }
    }
    let mut params = build_params(&names, &sorted, &fixed, &unscale);
    for k in 0..n_components {
        let ph = &mut params[5 + 3 * k];
        ph.value = wrap_phase(ph.value);
        if params[3 + 3 * k].value == 0.0 {
            params[4 + 3 * k].identifiable = false;
            params[5 + 3 * k].identifiable = false;
        }
    }
    if !out.converged {
        warnings.push("damping saturated before the tolerances were met".to_string());
    }
    Ok(FitResult {
        model: format!("decaying_cosines_{n_components}"),
        params,
        residual_norm: (2.0 * out.cost).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        warnings,
    })
}

/// Fits `A·e^(−(t/Γ)^β) + c` with `β ∈ (0.3, 4)`. Parameters are reported
/// as `amplitude`, `decay_time`, `beta`, `offset`.
pub fn fit_stretched_exp(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let s = check_xy(x, y)?;
    let u: Vec<f64> = x.iter().map(|v| v / s).collect();
    let m = y.len();
    let third = (m / 3).max(1);
    let head = y[..third].iter().sum::<f64>() / third as f64;
    let tail = y[m - third..].iter().sum::<f64>() / third as f64;
    let mut warnings = Vec::new();
    if head <= tail {
        warnings.push("trace does not decay overall".to_string());
    }
    let tail_n = (m / 10).max(1);
    let c0 = y[m - tail_n..].iter().sum::<f64>() / tail_n as f64;
    let a0 = y[0] - c0;
    let gamma0 = u
        .iter()
        .zip(y)
        .find(|(_, &v)| (v - c0).abs() < a0.abs() / std::f64::consts::E)
        .map(|(&ui, _)| ui.max(1e-3))
        .unwrap_or(0.5);

    let residual = |p: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(y)
            .map(|(&ui, &yi)| p[0] * envelope(ui, p[1], p[2]) + p[3] - yi)
            .collect()
    };
    let yscale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let fixed = vec![false; 4];
    let problem = LmProblem {
        residual: &residual,
        scale: vec![yscale, 1.0, 1.0, yscale],
        lower: vec![f64::NEG_INFINITY, 1e-4, 0.3, f64::NEG_INFINITY],
        upper: vec![f64::INFINITY, 1e4, 4.0, f64::INFINITY],
        fixed: fixed.clone(),
    };
    let out = levenberg_marquardt(&problem, &[a0, gamma0, 1.0, c0], &LmOptions::default())?;
    let names: Vec<String> = ["amplitude", "decay_time", "beta", "offset"]
        .iter()
        .map(|n| n.to_string())
        .collect();
    let mut params = build_params(&names, &out, &fixed, &[1.0, s, 1.0, 1.0]);
    if out.params[0] == 0.0 {
        params[1].identifiable = false;
        params[2].identifiable = false;
    }
    if !out.converged {
        warnings.push("damping saturated before the tolerances were met".to_string());
    }
    Ok(FitResult {
        model: "stretched_exp".into(),
        params,
        residual_norm: (2.0 * out.cost).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dx: f64) -> Vec<f64> {
        (0..n).map(|i| (i + 1) as f64 * dx).collect()
    }

    #[test]
    fn recovers_two_planted_frequencies() {
        let x = grid(200, 1e-6);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| {
                (-(t / 150e-6)).exp()
                    * (0.4 * (TAU * 71.2e3 * t + 0.3).cos() + 0.15 * (TAU * 140.6e3 * t - 1.0).cos())
                    + 0.05
            })
            .collect();
        let r = fit_decaying_cosines(&x, &y, 2, &CosineFitOptions::default()).unwrap();
        assert!(r.converged);
        let f1 = r.value("freq_1").unwrap();
        let f2 = r.value("freq_2").unwrap();
        assert!((f1 / 71.2e3 - 1.0).abs() < 1e-3, "{f1}");
        assert!((f2 / 140.6e3 - 1.0).abs() < 1e-3, "{f2}");
    }

    #[test]
    fn zero_trace_flags_frequencies() {
        let x = grid(64, 1e-6);
        let y = vec![0.0; 64];
        let r = fit_decaying_cosines(&x, &y, 1, &CosineFitOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.value("amp_1").unwrap(), 0.0);
        assert!(!r.param("freq_1").unwrap().identifiable);
    }

    #[test]
    fn refit_is_idempotent() {
        let x = grid(120, 1e-6);
        let y: Vec<f64> = x
            .iter()
            .map(|&t| (-(t / 80e-6)).exp() * 0.5 * (TAU * 50e3 * t + 0.7).cos() + 0.01 * (t * 1e6).sin())
            .collect();
        let a = fit_decaying_cosines(&x, &y, 1, &CosineFitOptions::default()).unwrap();
        let hint = CosineFitOptions {
            hints: Some(vec![a.value("freq_1").unwrap()]),
            ..Default::default()
        };
        let b = fit_decaying_cosines(&x, &y, 1, &hint).unwrap();
        for (p, q) in a.params.iter().zip(&b.params) {
            assert!((p.value - q.value).abs() <= 1e-8 * p.value.abs().max(1e-4), "{} {} {}", p.name, p.value, q.value);
        }
    }

    #[test]
    fn stretched_exp_recovers_planted_values() {
        let x = grid(150, 0.1e-6);
        for (gamma, beta) in [(5.1e-6, 1.0), (4.3e-6, 1.5)] {
            let y: Vec<f64> = x.iter().map(|&t| 0.8 * (-(t / gamma).powf(beta)).exp() + 0.1).collect();
            let r = fit_stretched_exp(&x, &y).unwrap();
            assert!((r.value("decay_time").unwrap() / gamma - 1.0).abs() < 0.01);
            assert!((r.value("beta").unwrap() / beta - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn constant_trace_gives_offset() {
        let x = grid(50, 1e-6);
        let y = vec![0.25; 50];
        let r = fit_stretched_exp(&x, &y).unwrap();
        assert!(r.value("amplitude").unwrap().abs() < 1e-9);
        assert!((r.value("offset").unwrap() - 0.25).abs() < 1e-12);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn component_count_validated() {
        let x = grid(10, 1.0);
        assert!(fit_decaying_cosines(&x, &x, 4, &CosineFitOptions::default()).is_err());
    }
}
