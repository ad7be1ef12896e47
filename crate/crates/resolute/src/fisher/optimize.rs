//! Search for the `(τ, T_corr)` pair maximizing the phase-averaged
//! information of one sequence.

use super::fisher_exact_sequence;
use crate::error::{Error, Result};
use crate::model::{SensorParams, SequenceParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeBounds {
    pub tau_min: f64,
    pub tau_max: f64,
    pub t_corr_min: f64,
    pub t_corr_max: f64,
    pub tau_points: usize,
    /// Minimum number of `T_corr` grid points; more are added so that the
    /// spacing at the top of the range stays below an eighth of the signal period.
    pub t_corr_points: usize,
    pub refine_rounds: usize,
    /// Local maxima below this fraction of the best value are not reported.
    pub ridge_fraction: f64,
}

impl OptimizeBounds {
    pub fn new(tau: (f64, f64), t_corr: (f64, f64)) -> Self {
        Self {
            tau_min: tau.0,
            tau_max: tau.1,
            t_corr_min: t_corr.0,
            t_corr_max: t_corr.1,
            tau_points: 32,
            t_corr_points: 120,
            refine_rounds: 3,
            ridge_fraction: 0.5,
        }
    }
}

/// A local maximum of the information along `T_corr` at the optimal `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub tau: f64,
    pub t_corr: f64,
    pub fi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub tau: f64,
    pub t_corr: f64,
    pub fi: f64,
    pub ridges: Vec<Ridge>,
    pub warnings: Vec<String>,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (r * i as f64 / (n - 1) as f64).exp())
        .collect()
}

const T_CORR_POINT_CAP: usize = 4000;
const CANDIDATES: usize = 12;

fn t_corr_count(b: &OptimizeBounds, omega: f64) -> usize {
    if b.t_corr_min == b.t_corr_max {
        return 1;
    }
    let mut n = b.t_corr_points.max(2);
    if omega > 0.0 {
        let eighth = std::f64::consts::TAU / omega / 8.0;
        let ratio = (b.t_corr_max / b.t_corr_min).ln();
        let step = -(1.0 - eighth / b.t_corr_max).max(1e-12).ln();
        let needed = (ratio / step).ceil() as usize + 1;
        n = n.max(needed.min(T_CORR_POINT_CAP));
    }
    n
}

fn golden_max(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-9 * (a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

fn bracket(grid: &[f64], i: usize) -> (f64, f64) {
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    (lo, hi)
}

/// Coarse log-grid search over `(τ, T_corr)` followed by alternating
/// golden-section refinement of each axis around the best cell.
///
/// The tone amplitude enters because the exact information is nonlinear in
/// the accumulated phase.
pub fn optimize_sequence(
    omega: f64,
    amplitude: f64,
    sensor: &SensorParams<f64>,
    bounds: &OptimizeBounds,
) -> Result<OptimizeResult> {
    let b = bounds;
    let positive = [b.tau_min, b.tau_max, b.t_corr_min, b.t_corr_max]
        .iter()
        .all(|&v| v > 0.0 && v.is_finite());
    if !positive || b.tau_min > b.tau_max || b.t_corr_min > b.t_corr_max {
        return Err(Error::EmptyRegion(format!(
            "tau in [{:e}, {:e}], t_corr in [{:e}, {:e}]",
            b.tau_min, b.tau_max, b.t_corr_min, b.t_corr_max
        )));
    }
    if b.t_corr_max > sensor.t1 {
        return Err(Error::Invalid("t_corr upper bound exceeds T1".into()));
    }
    let mut warnings = Vec::new();
    if b.tau_min >= b.t_corr_max {
        warnings.push("tau < t_corr does not hold anywhere inside the bounds".to_string());
    }

    let objective = |tau: f64, tc: f64| -> Result<f64> {
        fisher_exact_sequence(omega, amplitude, &SequenceParams::new(tau, tc, 1), sensor)
    };

    let taus = log_grid(b.tau_min, b.tau_max, b.tau_points);
    let tcs = log_grid(b.t_corr_min, b.t_corr_max, t_corr_count(b, omega));
    let grid: Vec<Vec<f64>> = taus
        .par_iter()
        .map(|&tau| tcs.iter().map(|&tc| objective(tau, tc)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let row_peaks = |row: &[f64]| -> Vec<usize> {
        (0..row.len())
            .filter(|&j| {
                let left = if j > 0 { row[j - 1] } else { f64::NEG_INFINITY };
                let right = if j + 1 < row.len() { row[j + 1] } else { f64::NEG_INFINITY };
                row[j] > left && row[j] >= right && row[j] > 0.0
            })
            .collect()
    };

    let mut cells: Vec<(usize, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row_peaks(row).into_iter().map(move |j| (i, j)))
        .collect();
    if cells.is_empty() {
        cells.push((0, 0));
    }
    cells.sort_by(|a, c| grid[c.0][c.1].total_cmp(&grid[a.0][a.1]));
    cells.truncate(CANDIDATES);

    let refine = |i: usize, j: usize| -> Result<(f64, f64, f64)> {
        let (mut tau, mut tc, mut best) = (taus[i], tcs[j], grid[i][j]);
        let (tau_lo, tau_hi) = bracket(&taus, i);
        let (tc_lo, tc_hi) = bracket(&tcs, j);
        for _ in 0..b.refine_rounds {
            if tau_hi > tau_lo {
                let (x, v) = golden_max(&|t| objective(t, tc), tau_lo, tau_hi)?;
                if v > best {
                    tau = x;
                    best = v;
                }
            }
            if tc_hi > tc_lo {
                let (x, v) = golden_max(&|t| objective(tau, t), tc_lo, tc_hi)?;
                if v > best {
                    tc = x;
                    best = v;
                }
            }
        }
        Ok((tau, tc, best))
    };
    let refined = cells
        .par_iter()
        .map(|&(i, j)| refine(i, j))
        .collect::<Result<Vec<_>>>()?;
    let (mut tau, mut tc, mut best) = refined
        .iter()
        .cloned()
        .fold((taus[0], tcs[0], f64::NEG_INFINITY), |acc, r| if r.2 > acc.2 { r } else { acc });
    let bi = cells[0].0;

    let row = &grid[bi];
    let row_max = row.iter().cloned().fold(0.0, f64::max);
    let mut ridges = Vec::new();
    for j in row_peaks(row) {
        if row[j] < b.ridge_fraction * row_max {
            continue;
        }
        let (lo, hi) = bracket(&tcs, j);
        let (x, v) = if hi > lo {
            golden_max(&|t| objective(taus[bi], t), lo, hi)?
        } else {
            (tcs[j], row[j])
        };
        let ridge = if v > row[j] {
            Ridge { tau: taus[bi], t_corr: x, fi: v }
        } else {
            Ridge { tau: taus[bi], t_corr: tcs[j], fi: row[j] }
        };
        if ridge.fi > best {
            tau = ridge.tau;
            tc = ridge.t_corr;
            best = ridge.fi;
        }
        ridges.push(ridge);
    }

    if tau >= tc {
        let msg = format!("optimum has tau ({tau:e} s) >= t_corr ({tc:e} s)");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(OptimizeResult {
        tau,
        t_corr: tc,
        fi: best,
        ridges,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_max(&|x| Ok(-(x - 0.3) * (x - 0.3) + 2.0), 0.0, 1.0).unwrap();
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 100.0, 3);
        assert_eq!(g.len(), 3);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(log_grid(5.0, 5.0, 10), vec![5.0]);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let s = SensorParams::default();
        let b = OptimizeBounds::new((5e-6, 1e-6), (10e-6, 100e-6));
        assert!(matches!(optimize_sequence(1e5, 1e6, &s, &b), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn tau_above_t_corr_everywhere_warns() {
        let s = SensorParams::default();
        let mut b = OptimizeBounds::new((20e-6, 30e-6), (5e-6, 10e-6));
        b.tau_points = 4;
        b.t_corr_points = 8;
        let r = optimize_sequence(2.0 * std::f64::consts::PI * 50e3, 1e6, &s, &b).unwrap();
        assert!(!r.warnings.is_empty());
        assert!(r.fi > 0.0);
    }

    #[test]
    fn ten_kilohertz_optimum_sits_near_t2p_and_long_t_corr() {
        let s = SensorParams::default();
        let mut b = OptimizeBounds::new((0.5e-6, 20e-6), (10e-6, 900e-6));
        b.tau_points = 16;
        let r = optimize_sequence(2.0 * std::f64::consts::PI * 10e3, 1e6, &s, &b).unwrap();
        assert!(r.tau >= 0.5 * s.t2_p && r.tau <= 1.5 * s.t2_p, "{r:?}");
        assert!(r.t_corr >= 810e-6, "{r:?}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn fixed_tau_reports_several_ridges() {
        let s = SensorParams::default();
        let mut b = OptimizeBounds::new((10e-6, 10e-6), (10e-6, 200e-6));
        b.tau_points = 1;
        let r = optimize_sequence(2.0 * std::f64::consts::PI * 100e3, 1e6, &s, &b).unwrap();
        assert!(r.ridges.len() >= 2, "{:?}", r.ridges);
        assert!(r.ridges.iter().all(|x| x.fi <= r.fi * (1.0 + 1e-9)));
    }
}
