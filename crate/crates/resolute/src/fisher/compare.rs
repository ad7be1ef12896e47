//! Protocol comparison at equal experiment duration.

use super::{fisher_exact_sequence_with_nodes, fisher_single};
use crate::block::{single_phase_p0, Quadrature};
use crate::error::{Error, Result};
use crate::model::{ReadoutSign, SensorParams, SequenceParams};
use crate::phase::{window_phase, window_phase_domega};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Frequency-resolution threshold: feasible when `1/I ≤ coefficient·ω^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighCriterion {
    pub coefficient: f64,
    pub exponent: f64,
}

impl Default for RayleighCriterion {
    /// `Δω² ≤ 4/ω²` with `Δω² = 1/I`.
    fn default() -> Self {
        Self {
            coefficient: 4.0,
            exponent: -2.0,
        }
    }
}

impl RayleighCriterion {
    /// `Δω ≤ ω/2`, i.e. `1/I ≤ ω²/4`.
    pub fn relative() -> Self {
        Self {
            coefficient: 0.25,
            exponent: 2.0,
        }
    }

    /// The boundary `1/I = threshold` counts as feasible.
    pub fn feasible(&self, i_total: f64, omega: f64) -> bool {
        if !(i_total > 0.0) {
            return false;
        }
        if i_total.is_infinite() {
            return true;
        }
        1.0 / i_total <= self.coefficient * omega.powf(self.exponent)
    }
}

/// Comparison settings. Defaults: `T2p = T2 = 5 µs`, `T2* = 0.5 µs`,
/// `T1 = 1000 µs`, overhead 3 µs, 500 sequences, `τ = T2p` for the
/// correlation sequence, and a tone amplitude of 1 rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonParams {
    pub sensor: SensorParams<f64>,
    pub amplitude: f64,
    pub tau_resolute: f64,
    pub n_sequences: usize,
    pub phi_nodes: usize,
    pub rayleigh: RayleighCriterion,
}

impl Default for ComparisonParams {
    fn default() -> Self {
        let sensor = SensorParams {
            t1: 1000e-6,
            t2_star: 0.5e-6,
            t2_hahn: 5e-6,
            t2_p: 5e-6,
            contrast: 1.0,
            overhead: 3e-6,
            ..SensorParams::default()
        };
        Self {
            sensor,
            amplitude: 1e6,
            tau_resolute: 5e-6,
            n_sequences: 500,
            phi_nodes: super::PHI_NODES,
            rayleigh: RayleighCriterion::default(),
        }
    }
}

/// Per-frequency information of each protocol over the same wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub omega: Vec<f64>,
    pub fi_resolute: Vec<f64>,
    pub fi_hahn: Vec<f64>,
    pub fi_ramsey: Vec<f64>,
    pub crb_resolute: Vec<f64>,
    pub crb_hahn: Vec<f64>,
    pub crb_ramsey: Vec<f64>,
    pub feasible_resolute: Vec<bool>,
    pub feasible_hahn: Vec<bool>,
    pub feasible_ramsey: Vec<bool>,
    pub t_corr_resolute: Vec<f64>,
    pub tau_hahn: Vec<f64>,
    pub duration: Vec<f64>,
    pub params: ComparisonParams,
}

fn crb(i: f64) -> f64 {
    if i > 0.0 {
        1.0 / i
    } else {
        f64::INFINITY
    }
}

/// Shortest correlation time `n·2π/ω ≥ τ`, capped at `t_max`.
pub fn matched_t_corr(omega: f64, tau: f64, t_max: f64) -> f64 {
    if omega <= 0.0 {
        return t_max;
    }
    let period = std::f64::consts::TAU / omega;
    let n = (tau / period).ceil().max(1.0);
    (n * period).min(t_max)
}

/// Phase-averaged information of a four-block single-phase cycle (cosine
/// and sine quadratures, each with both readout signs).
fn single_phase_cycle<T: Real>(
    phase: impl Fn(T) -> (T, T),
    decay: T,
    contrast: T,
    nodes: usize,
) -> Result<T> {
    let n = T::from_usize(nodes).unwrap();
    let mut sum = T::zero();
    for k in 0..nodes {
        let phi = T::TAU() * T::from_usize(k).unwrap() / n;
        let (p, dp) = phase(phi);
        for q in [Quadrature::Cos, Quadrature::Sin] {
            for sign in [ReadoutSign::Plus, ReadoutSign::Minus] {
                let (p0, dp0_dphase) = single_phase_p0(q, sign, p, decay, contrast);
                sum += fisher_single(p0, dp0_dphase * dp)?;
            }
        }
    }
    Ok(sum / n)
}

/// Hahn-echo cycle information for echo length `tau`.
pub fn hahn_cycle_fisher<T: Real>(
    omega: T,
    amplitude: T,
    tau: T,
    sensor: &SensorParams<T>,
    nodes: usize,
) -> Result<T> {
    let half = tau / T::lit(2.0);
    let decay = (-tau / sensor.t2_hahn).exp();
    single_phase_cycle(
        |phi| {
            let p = window_phase(amplitude, omega, phi, T::zero(), half)
                - window_phase(amplitude, omega, phi, half, tau);
            let d = window_phase_domega(amplitude, omega, phi, T::zero(), half)
                - window_phase_domega(amplitude, omega, phi, half, tau);
            (p, d)
        },
        decay,
        sensor.contrast,
        nodes,
    )
}

/// Ramsey cycle information for sensing time `tau`.
pub fn ramsey_cycle_fisher<T: Real>(
    omega: T,
    amplitude: T,
    tau: T,
    sensor: &SensorParams<T>,
    nodes: usize,
) -> Result<T> {
    let decay = (-tau / sensor.t2_star).exp();
    single_phase_cycle(
        |phi| {
            (
                window_phase(amplitude, omega, phi, T::zero(), tau),
                window_phase_domega(amplitude, omega, phi, T::zero(), tau),
            )
        },
        decay,
        sensor.contrast,
        nodes,
    )
}

/// Information of each protocol over the duration of `n_sequences`
/// correlation sequences with frequency-matched `T_corr`.
///
/// Hahn echo uses `τ_H = min(2π/ω, T2)`, Ramsey uses `τ_R = T2*`; both repeat
/// four-block cycles for the same total time, each block costing its sensing
/// time plus the overhead.
pub fn compare_protocols(omega_grid: &[f64], params: &ComparisonParams) -> Result<FisherReport> {
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("omega grid must be strictly increasing".into()));
    }
    params.sensor.validate()?;
    let s = &params.sensor;
    let tau = params.tau_resolute;
    let mut report = FisherReport {
        omega: omega_grid.to_vec(),
        fi_resolute: vec![],
        fi_hahn: vec![],
        fi_ramsey: vec![],
        crb_resolute: vec![],
        crb_hahn: vec![],
        crb_ramsey: vec![],
        feasible_resolute: vec![],
        feasible_hahn: vec![],
        feasible_ramsey: vec![],
        t_corr_resolute: vec![],
        tau_hahn: vec![],
        duration: vec![],
        params: *params,
    };
    for &w in omega_grid {
        let t_corr = matched_t_corr(w, tau, s.t1);
        let seq = SequenceParams::new(tau, t_corr, 1);
        let per_seq = fisher_exact_sequence_with_nodes(w, params.amplitude, &seq, s, params.phi_nodes)?;
        let n = params.n_sequences as f64;
        let fi_res = n * per_seq;
        let duration = n * 4.0 * (tau + t_corr + s.overhead);

        let tau_h = if w > 0.0 {
            (std::f64::consts::TAU / w).min(s.t2_hahn)
        } else {
            s.t2_hahn
        };
        let cycles_h = duration / (4.0 * (tau_h + s.overhead));
        let fi_h = cycles_h * hahn_cycle_fisher(w, params.amplitude, tau_h, s, params.phi_nodes)?;

        let tau_r = s.t2_star;
        let cycles_r = duration / (4.0 * (tau_r + s.overhead));
        let fi_r = cycles_r * ramsey_cycle_fisher(w, params.amplitude, tau_r, s, params.phi_nodes)?;

        for (fi, crb_v, feas) in [
            (fi_res, &mut report.crb_resolute, &mut report.feasible_resolute),
            (fi_h, &mut report.crb_hahn, &mut report.feasible_hahn),
            (fi_r, &mut report.crb_ramsey, &mut report.feasible_ramsey),
        ] {
            crb_v.push(crb(fi));
            feas.push(params.rayleigh.feasible(fi, w));
        }
        report.fi_resolute.push(fi_res);
        report.fi_hahn.push(fi_h);
        report.fi_ramsey.push(fi_r);
        report.t_corr_resolute.push(t_corr);
        report.tau_hahn.push(tau_h);
        report.duration.push(duration);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rayleigh_edge_cases() {
        let r = RayleighCriterion::default();
        assert!(r.feasible(f64::INFINITY, 1e5));
        assert!(!r.feasible(0.0, 1e5));
        let w: f64 = 3.0;
        let boundary = w * w / 4.0;
        assert!(r.feasible(boundary, w));
        assert!(!r.feasible(boundary * 0.999, w));
        let rel = RayleighCriterion::relative();
        assert!(rel.feasible(4.0 / (w * w), w));
    }

    #[test]
    fn matched_t_corr_spans_whole_periods() {
        let w = 2.0 * PI * 50e3;
        let tc = matched_t_corr(w, 5e-6, 1e-3);
        assert!(tc >= 5e-6);
        let cycles = w * tc / (2.0 * PI);
        assert!((cycles - cycles.round()).abs() < 1e-9);
        assert_eq!(matched_t_corr(2.0 * PI * 100.0, 5e-6, 1e-3), 1e-3);
    }

    #[test]
    fn ordering_at_fifty_khz() {
        let w = 2.0 * PI * 50e3;
        let r = compare_protocols(&[w], &ComparisonParams::default()).unwrap();
        assert!(r.fi_resolute[0] > r.fi_hahn[0], "{:?}", r);
        assert!(r.fi_resolute[0] > r.fi_ramsey[0], "{:?}", r);
    }

    #[test]
    fn hahn_wins_at_one_megahertz() {
        let w = 2.0 * PI * 1e6;
        let r = compare_protocols(&[w], &ComparisonParams::default()).unwrap();
        assert!(r.fi_hahn[0] >= r.fi_resolute[0], "{:?}", r);
    }

    #[test]
    fn below_inverse_t1_nothing_is_feasible() {
        let w = 2.0 * PI * 500.0;
        let r = compare_protocols(&[w], &ComparisonParams::default()).unwrap();
        assert!(!r.feasible_resolute[0] && !r.feasible_hahn[0] && !r.feasible_ramsey[0]);
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        assert!(compare_protocols(&[2.0, 1.0], &ComparisonParams::default()).is_err());
    }
}
