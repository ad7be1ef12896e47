//! Maximum-likelihood frequency estimates from block counts and their
//! comparison with the Cramér–Rao bound.

use super::{FitParam, FitResult};
use crate::error::{Error, Result};
use crate::fisher::block_probability;
use crate::model::{effective_period, BlockSpec, SensorParams, SequenceParams};
use crate::sim::BlockCounts;
use serde::{Deserialize, Serialize};

/// Minimum replica count for a report.
pub const MIN_REPLICAS: usize = 50;

const GRID: usize = 256;

fn log_likelihood(counts: &BlockCounts, probs: &[f64; 4]) -> f64 {
    let n = counts.trials as f64;
    (0..4)
        .map(|k| {
            let g = counts.ground[k] as f64;
            let p = probs[k].clamp(1e-300, 1.0 - 1e-16);
            g * p.ln() + (n - g) * (1.0 - p).ln()
        })
        .sum()
}

/// Expected log-likelihood deficit (nats) below which a secondary mode is
/// treated as competing with the true one.
pub const COMPETING_MODE_DEFICIT: f64 = 25.0;

const LANDSCAPE_POINTS: usize = 2048;

/// Half-width of the bracket around `omega0` in which the frequency is
/// identifiable from `trials` outcomes per block.
///
/// The noise-free log-likelihood is scanned over one alias interval
/// `omega0 ± π/T̃`. Modes whose expected deficit is below
/// [`COMPETING_MODE_DEFICIT`] (including exact twins produced by the sign
/// symmetry of the block probabilities) cannot be told apart from `omega0`,
/// so the bracket extends to half the distance to the nearest one.
pub fn identifiable_half_width(
    amplitude: f64,
    phi: f64,
    seq: &SequenceParams<f64>,
    sensor: &SensorParams<f64>,
    omega0: f64,
    trials: u64,
) -> f64 {
    let alias = std::f64::consts::PI / effective_period(seq);
    let probs = |w: f64| -> [f64; 4] {
        let mut p = [0.0; 4];
        for (k, b) in BlockSpec::ALL.iter().enumerate() {
            p[k] = block_probability(*b, w, amplitude, phi, seq, sensor).0;
        }
        p
    };
    let n = trials as f64;
    let truth = probs(omega0);
    let expected_ll = |w: f64| -> f64 {
        let p = probs(w);
        (0..4)
            .map(|k| {
                let q = p[k].clamp(1e-300, 1.0 - 1e-16);
                n * (truth[k] * q.ln() + (1.0 - truth[k]) * (1.0 - q).ln())
            })
            .sum()
    };
    let l0 = expected_ll(omega0);
    let xs: Vec<f64> = (0..=LANDSCAPE_POINTS)
        .map(|k| omega0 - alias + 2.0 * alias * k as f64 / LANDSCAPE_POINTS as f64)
        .collect();
    let v: Vec<f64> = xs.iter().map(|&w| expected_ll(w)).collect();
    let spacing = 2.0 * alias / LANDSCAPE_POINTS as f64;
    (1..LANDSCAPE_POINTS)
        .filter(|&k| v[k] > v[k - 1] && v[k] >= v[k + 1])
        .filter(|&k| (xs[k] - omega0).abs() > 2.0 * spacing)
        .filter(|&k| l0 - v[k] < COMPETING_MODE_DEFICIT)
        .map(|k| 0.5 * (xs[k] - omega0).abs())
        .fold(alias, f64::min)
}

/// Maximum-likelihood estimate of `ω` from the ground-state tallies of the
/// four blocks, for a tone of known amplitude and phase.
///
/// The likelihood repeats almost exactly every `2π/T̃` in `ω` and may hold
/// twin modes inside one period, so the search is confined to
/// `omega0 ± half_width` (default [`identifiable_half_width`]): a grid scan
/// locates the best mode, then Fisher scoring with step halving refines it. The reported sigma is `1/√I(ω̂)` with `I` the
/// expected information of the tallies.
pub fn fit_frequency_counts(
    counts: &BlockCounts,
    amplitude: f64,
    phi: f64,
    seq: &SequenceParams<f64>,
    sensor: &SensorParams<f64>,
    omega0: f64,
    half_width: Option<f64>,
) -> Result<FitResult> {
    if counts.trials == 0 {
        return Err(Error::Invalid("no trials recorded".into()));
    }
    let hw = half_width
        .unwrap_or_else(|| identifiable_half_width(amplitude, phi, seq, sensor, omega0, counts.trials));
    if !(hw > 0.0) {
        return Err(Error::Invalid("search half-width must be positive".into()));
    }
    let (lo, hi) = (omega0 - hw, omega0 + hw);
    let n = counts.trials as f64;
    let eval = |w: f64| -> ([f64; 4], [f64; 4]) {
        let mut p = [0.0; 4];
        let mut d = [0.0; 4];
        for (k, b) in BlockSpec::ALL.iter().enumerate() {
            let (pk, dk) = block_probability(*b, w, amplitude, phi, seq, sensor);
            p[k] = pk;
            d[k] = dk;
        }
        (p, d)
    };
    let info = |p: &[f64; 4], d: &[f64; 4]| -> f64 {
        (0..4)
            .map(|k| {
                let q = p[k].clamp(1e-300, 1.0 - 1e-16);
                n * d[k] * d[k] / (q * (1.0 - q))
            })
            .sum()
    };

    let mut w = (0..=GRID)
        .map(|k| lo + (hi - lo) * k as f64 / GRID as f64)
        .map(|w| (w, log_likelihood(counts, &eval(w).0)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(w, _)| w)
        .unwrap_or(omega0);
    let (mut p, mut d) = eval(w);
    let mut ll = log_likelihood(counts, &p);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 200 {
        iterations += 1;
        let score: f64 = (0..4)
            .map(|k| {
                let g = counts.ground[k] as f64;
                let q = p[k].clamp(1e-300, 1.0 - 1e-16);
                (g / q - (n - g) / (1.0 - q)) * d[k]
            })
            .sum();
        let i = info(&p, &d);
        if !(i > 0.0) {
            return Err(Error::RankDeficient);
        }
        let tol = 1e-9 * i.sqrt().recip();
        let mut step = score / i;
        let mut moved = false;
        for _ in 0..60 {
            if step.abs() <= tol {
                break;
            }
            let trial = (w + step).clamp(lo, hi);
            let (tp, td) = eval(trial);
            let tll = log_likelihood(counts, &tp);
            if tll > ll {
                moved = (trial - w).abs() > tol;
                w = trial;
                p = tp;
                d = td;
                ll = tll;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            converged = true;
            break;
        }
    }
    let i = info(&p, &d);
    let mut warnings = Vec::new();
    if !converged {
        warnings.push("scoring iterations exhausted".to_string());
    }
    if w <= lo || w >= hi {
        warnings.push("estimate on the edge of the search interval".to_string());
    }
    Ok(FitResult {
        model: "ml_frequency".into(),
        params: vec![FitParam {
            name: "omega".into(),
            value: w,
            sigma: if i > 0.0 { i.sqrt().recip() } else { f64::INFINITY },
            identifiable: i > 0.0,
        }],
        residual_norm: -ll,
        converged,
        iterations,
        warnings,
    })
}

/// Sample MSE of replica estimates against the bound `1/i_total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    pub replicas: usize,
    pub truth: f64,
    pub bias: f64,
    pub mse: f64,
    /// Standard error of the MSE estimate.
    pub mse_stderr: f64,
    pub crb: f64,
    pub ratio: f64,
    /// `MSE + 2·stderr ≥ CRB`.
    pub consistent: bool,
    /// The MSE sits at numerical precision, so the ratio is not meaningful.
    pub floor_limited: bool,
    pub warnings: Vec<String>,
}

pub fn crb_report_values(estimates: &[f64], truth: f64, i_total: f64) -> Result<CrbReport> {
    if estimates.len() < MIN_REPLICAS {
        return Err(Error::TooFewReplicas {
            needed: MIN_REPLICAS,
            got: estimates.len(),
        });
    }
    if !(i_total > 0.0) {
        return Err(Error::Invalid("total information must be positive".into()));
    }
    let n = estimates.len() as f64;
    let sq: Vec<f64> = estimates.iter().map(|e| (e - truth) * (e - truth)).collect();
    let mse = sq.iter().sum::<f64>() / n;
    let var_sq = sq.iter().map(|s| (s - mse) * (s - mse)).sum::<f64>() / (n - 1.0);
    let mse_stderr = (var_sq / n).sqrt();
    let bias = estimates.iter().map(|e| e - truth).sum::<f64>() / n;
    let crb = 1.0 / i_total;
    let floor = (1e-14 * truth.abs()).powi(2);
    let floor_limited = mse <= floor;
    let consistent = mse + 2.0 * mse_stderr >= crb;
    let mut warnings = Vec::new();
    if floor_limited {
        warnings.push("MSE at numerical precision floor".to_string());
    } else if !consistent {
        warnings.push("MSE below the Cramér-Rao bound beyond statistical tolerance".to_string());
    }
    Ok(CrbReport {
        replicas: estimates.len(),
        truth,
        bias,
        mse,
        mse_stderr,
        crb,
        ratio: mse / crb,
        consistent,
        floor_limited,
        warnings,
    })
}

/// Report on the parameter `param` of each converged replica fit.
pub fn crb_report(fits: &[FitResult], param: &str, truth: f64, i_total: f64) -> Result<CrbReport> {
    let values = fits
        .iter()
        .filter(|f| f.converged)
        .map(|f| {
            f.value(param)
                .ok_or_else(|| Error::Invalid(format!("fit has no parameter '{param}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = crb_report_values(&values, truth, i_total)?;
    let dropped = fits.len() - values.len();
    if dropped > 0 {
        r.warnings.push(format!("{dropped} unconverged replicas excluded"));
    }
    Ok(r)
}

/// Fraction of fits whose `±k·σ` interval for `param` contains `truth`.
pub fn coverage(fits: &[FitResult], param: &str, truth: f64, k: f64) -> f64 {
    let hits = fits
        .iter()
        .filter_map(|f| f.param(param))
        .filter(|p| (p.value - truth).abs() <= k * p.sigma)
        .count();
    hits as f64 / fits.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::fisher_sequence_at_phase;
    use crate::model::ToneSignal;
    use crate::sim::{simulate_block_counts, SimConfig};
    use std::f64::consts::PI;

    #[test]
    fn too_few_replicas() {
        assert!(matches!(
            crb_report_values(&[1.0; 10], 1.0, 1.0),
            Err(Error::TooFewReplicas { needed: 50, got: 10 })
        ));
    }

    #[test]
    fn exact_estimates_are_floor_limited() {
        let r = crb_report_values(&[5.0; 60], 5.0, 1e6).unwrap();
        assert!(r.floor_limited);
        assert_eq!(r.mse, 0.0);
    }

    #[test]
    fn ml_fit_is_efficient() {
        let w = 2.0 * PI * 69e3;
        let (a, phi) = (1e6, 0.75 * PI);
        let mut cfg = SimConfig {
            tones: vec![ToneSignal::new(a, w, Some(phi))],
            seq: SequenceParams::new(5e-6, 9.0 / 69e3, 100),
            shots_per_block: 100,
            intrinsic_decay: true,
            ..SimConfig::default()
        };
        cfg.noise.seed = 3;
        let per = fisher_sequence_at_phase(w, a, phi, &cfg.seq, &cfg.sensor).unwrap();
        let i_total = per * 10_000.0;
        let fits: Vec<FitResult> = (0..200)
            .map(|r| {
                let c = simulate_block_counts(&cfg, r).unwrap();
                fit_frequency_counts(&c, a, phi, &cfg.seq, &cfg.sensor, w, None).unwrap()
            })
            .collect();
        let rep = crb_report(&fits, "omega", w, i_total).unwrap();
        assert!(rep.consistent && rep.ratio < 3.0, "{rep:?}");
        let cov = coverage(&fits, "omega", w, 2.0);
        assert!(cov >= 0.9, "{cov} {rep:?} {:?}", &fits[..3]);
    }

    #[test]
    fn twin_mode_limits_the_bracket() {
        let w = 2.0 * PI * 69e3;
        let seq = SequenceParams::new(5e-6, 9.0 / 69e3, 100);
        let sensor = SensorParams::default();
        let alias = PI / effective_period(&seq);
        let hw = identifiable_half_width(1e6, 0.75 * PI, &seq, &sensor, w, 10_000);
        assert!(hw > 0.1 * alias && hw < alias, "{hw} {alias}");
    }
}
