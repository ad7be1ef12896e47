//! Fisher information for estimating a tone's angular frequency.
//!
//! The exact value sums the binary-outcome information of the four
//! phase-cycled blocks, each computed from the Bloch-propagated probability,
//! and averages over the signal phase on a uniform grid.

mod compare;
mod optimize;

pub use compare::{
    compare_protocols, hahn_cycle_fisher, matched_t_corr, ramsey_cycle_fisher, ComparisonParams, FisherReport,
    RayleighCriterion,
};
pub use optimize::{optimize_sequence, OptimizeBounds, OptimizeResult, Ridge};

use crate::block::{block_p0_closed, DecayFactors};
use crate::error::{Error, Result};
use crate::model::{effective_period, BlockSpec, SensorParams, SequenceParams};
use crate::phase::{resolute_window_phases, resolute_window_phases_domega};
use crate::real::{sinc, Real};
use serde::{Deserialize, Serialize};

/// Default number of uniform phase nodes for phase averages.
pub const PHI_NODES: usize = 64;

/// `(P0, ∂P0/∂ω)` of one block for a tone of amplitude `amplitude` (rad/s)
/// at fixed phase `phi`, evaluated at angular frequency `omega`.
pub fn block_probability<T: Real>(
    block: BlockSpec,
    omega: T,
    amplitude: T,
    phi: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
) -> (T, T) {
    let decay = DecayFactors::from_times(seq.tau, seq.t_corr, sensor);
    let (p1, p2) = resolute_window_phases(amplitude, omega, phi, seq);
    let (d1, d2) = resolute_window_phases_domega(amplitude, omega, phi, seq);
    let (p0, dp1, dp2) = block_p0_closed(block, p1, p2, decay, sensor.contrast);
    (p0, dp1 * d1 + dp2 * d2)
}

/// Information of one binary outcome, `(dP0)² / (P0 (1 − P0))`.
pub fn fisher_single<T: Real>(p0: T, dp0: T) -> Result<T> {
    if dp0 == T::zero() {
        return Ok(T::zero());
    }
    if !(p0 > T::zero() && p0 < T::one()) {
        return Err(Error::DegenerateOutcome { p0: p0.as_f64() });
    }
    Ok(dp0 * dp0 / (p0 * (T::one() - p0)))
}

/// Sum of the four block informations at a fixed signal phase.
pub fn fisher_sequence_at_phase<T: Real>(
    omega: T,
    amplitude: T,
    phi: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
) -> Result<T> {
    let mut total = T::zero();
    for block in BlockSpec::ALL {
        let (p0, dp0) = block_probability(block, omega, amplitude, phi, seq, sensor);
        total += fisher_single(p0, dp0)?;
    }
    Ok(total)
}

/// Phase-averaged exact information of one full sequence on `nodes` uniform
/// phases `φ_k = 2πk/nodes`.
pub fn fisher_exact_sequence_with_nodes<T: Real>(
    omega: T,
    amplitude: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
    nodes: usize,
) -> Result<T> {
    if nodes == 0 {
        return Err(Error::Invalid("phase node count must be positive".into()));
    }
    let n = T::from_usize(nodes).unwrap();
    let mut sum = T::zero();
    for k in 0..nodes {
        let phi = T::TAU() * T::from_usize(k).unwrap() / n;
        sum += fisher_sequence_at_phase(omega, amplitude, phi, seq, sensor)?;
    }
    Ok(sum / n)
}

/// Phase-averaged exact information of one full sequence.
pub fn fisher_exact_sequence<T: Real>(
    omega: T,
    amplitude: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
) -> Result<T> {
    fisher_exact_sequence_with_nodes(omega, amplitude, seq, sensor, PHI_NODES)
}

/// Approximate single-sequence information
/// `8A²τ²T̃² e^(−2τ/T2p − T_corr/T1) cos²(ωT̃ + ωτ/4 + φ) sinc²(ωτ/4)`.
pub fn fisher_approx<T: Real>(
    omega: T,
    amplitude: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
    phi: T,
) -> T {
    let tau = seq.tau;
    let tt = effective_period(seq);
    let q = omega * tau / T::lit(4.0);
    let c = (omega * tt + q + phi).cos();
    let s = sinc(q);
    approx_envelope(amplitude, seq, sensor) * c * c * s * s
}

/// [`fisher_approx`] averaged over the signal phase (cos² → ½).
pub fn fisher_approx_phase_avg<T: Real>(
    omega: T,
    amplitude: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
) -> T {
    let s = sinc(omega * seq.tau / T::lit(4.0));
    T::lit(0.5) * approx_envelope(amplitude, seq, sensor) * s * s
}

/// `8A²τ²T̃² e^(−2τ/T2p − T_corr/T1)`, the prefactor of [`fisher_approx`].
pub fn approx_envelope<T: Real>(amplitude: T, seq: &SequenceParams<T>, sensor: &SensorParams<T>) -> T {
    let tau = seq.tau;
    let tt = effective_period(seq);
    let decay = (-T::lit(2.0) * tau / sensor.t2_p - seq.t_corr / sensor.t1).exp();
    T::lit(8.0) * amplitude * amplitude * tau * tau * tt * tt * decay
}

/// Wall-clock duration of `n` sequences: `n·4·(τ + T_corr + overhead)`.
pub fn experiment_duration<T: Real>(seq: &SequenceParams<T>, sensor: &SensorParams<T>, n: usize) -> T {
    T::from_usize(4 * n).unwrap() * (seq.tau + seq.t_corr + sensor.overhead)
}

/// Information accumulated over an experiment of `n_sequences` sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFisher<T> {
    pub n_sequences: usize,
    pub per_sequence: T,
    pub total: T,
    /// Closed-form accumulation estimate
    /// `4A²τ²T̃·T_tot·4e^(−2τ/T2p)e^(−2T_corr/T1)` with `T_tot = 4NT̃`.
    pub closed_estimate: T,
    pub closed_ratio: T,
    pub duration: T,
}

pub fn fisher_experiment<T: Real>(
    omega: T,
    amplitude: T,
    seq: &SequenceParams<T>,
    sensor: &SensorParams<T>,
    n_sequences: usize,
) -> Result<ExperimentFisher<T>> {
    if n_sequences < 1 {
        return Err(Error::Invalid("n_sequences must be at least 1".into()));
    }
    let per_sequence = fisher_exact_sequence(omega, amplitude, seq, sensor)?;
    let n = T::from_usize(n_sequences).unwrap();
    let total = n * per_sequence;
    let tt = effective_period(seq);
    let t_tot = T::lit(4.0) * n * tt;
    let closed_estimate = T::lit(16.0)
        * amplitude
        * amplitude
        * seq.tau
        * seq.tau
        * tt
        * t_tot
        * (-T::lit(2.0) * seq.tau / sensor.t2_p - T::lit(2.0) * seq.t_corr / sensor.t1).exp();
    let closed_ratio = if closed_estimate > T::zero() {
        total / closed_estimate
    } else {
        T::nan()
    };
    Ok(ExperimentFisher {
        n_sequences,
        per_sequence,
        total,
        closed_estimate,
        closed_ratio,
        duration: experiment_duration(seq, sensor, n_sequences),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sensor() -> SensorParams<f64> {
        SensorParams {
            t2_p: 5.1e-6,
            t1: 1000e-6,
            ..SensorParams::default()
        }
    }

    #[test]
    fn no_signal_gives_baseline_probability() {
        let seq = SequenceParams::new(5e-6, 100e-6, 1);
        let s = sensor();
        let d = (-5.0 / 5.1 - 0.1f64).exp();
        let (p, dp) = block_probability(BlockSpec::ALL[0], 1e5, 0.0, 0.3, &seq, &s);
        assert!((p - 0.5 * (1.0 + d)).abs() < 1e-15);
        assert_eq!(dp, 0.0);
        assert_eq!(fisher_exact_sequence(1e5, 0.0, &seq, &s).unwrap(), 0.0);
    }

    #[test]
    fn single_outcome_examples() {
        assert_eq!(fisher_single(0.3, 0.0).unwrap(), 0.0);
        assert!((fisher_single(0.5f64, 3.0).unwrap() - 36.0).abs() < 1e-12);
        assert!(matches!(fisher_single(1.0, 0.1), Err(Error::DegenerateOutcome { .. })));
        assert_eq!(fisher_single(1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn single_outcome_matches_sine_probability_shape() {
        // P0 = ½(1 + D sin Φ) gives sin²... form: (D cos Φ Φ')² / (1 − D² sin² Φ).
        let (d, phi, dphi) = (0.6_f64, 0.9_f64, 2.5_f64);
        let p0 = 0.5 * (1.0 + d * phi.sin());
        let dp0 = 0.5 * d * phi.cos() * dphi;
        let expected = d * d * phi.cos().powi(2) * dphi * dphi / (1.0 - d * d * phi.sin().powi(2));
        assert!((fisher_single(p0, dp0).unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn exact_is_mean_of_phase_nodes() {
        let seq = SequenceParams::new(5e-6, 80e-6, 1);
        let s = sensor();
        let (w, a) = (2.0 * PI * 30e3, 1e6);
        let mut sum = 0.0;
        for k in 0..PHI_NODES {
            let phi = 2.0 * PI * k as f64 / PHI_NODES as f64;
            let mut per = 0.0;
            for b in BlockSpec::ALL {
                let (p, dp) = block_probability(b, w, a, phi, &seq, &s);
                per += fisher_single(p, dp).unwrap();
            }
            assert!((per - fisher_sequence_at_phase(w, a, phi, &seq, &s).unwrap()).abs() <= 1e-24);
            sum += per;
        }
        let exact = fisher_exact_sequence(w, a, &seq, &s).unwrap();
        assert!((exact - sum / PHI_NODES as f64).abs() <= 1e-12 * exact);
    }

    #[test]
    fn decay_factor_uses_both_times() {
        let seq = SequenceParams::new(5e-6, 100e-6, 1);
        let s = sensor();
        let d = DecayFactors::from_times(seq.tau, seq.t_corr, &s);
        assert!((d.total() - (-5.0 / 5.1 - 100.0 / 1000.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn approx_vanishes_on_cosine_node() {
        let seq = SequenceParams::new(5e-6, 100e-6, 1);
        let w = 2.0 * PI * 20e3;
        let tt = effective_period(&seq);
        let phi = PI / 2.0 - w * tt - w * seq.tau / 4.0;
        let v = fisher_approx(w, 1e6, &seq, &sensor(), phi);
        let scale = approx_envelope(1e6, &seq, &sensor());
        assert!(v.abs() < 1e-20 * scale.max(1.0));
    }

    #[test]
    fn approx_envelope_pinned_value() {
        let seq = SequenceParams::new(5e-6, 100e-6, 1);
        let v = approx_envelope(1.0, &seq, &sensor());
        let expected = 8.0 * 25e-12 * (102.5e-6f64).powi(2) * (-10.0 / 5.1 - 0.1f64).exp();
        assert!((v - expected).abs() < 1e-12 * expected);
        assert!((v - 2.676026874515915e-19).abs() < 1e-30, "{v:e}");
    }

    #[test]
    fn approx_envelope_peaks_at_t2p_in_tau() {
        let s = sensor();
        let f = |tau: f64| tau * tau * (-2.0 * tau / s.t2_p).exp();
        let h = 1e-9;
        let slope = (f(s.t2_p + h) - f(s.t2_p - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-6 * f(s.t2_p) / s.t2_p);
        assert!(f(s.t2_p) > f(0.9 * s.t2_p) && f(s.t2_p) > f(1.1 * s.t2_p));
    }

    #[test]
    fn experiment_is_linear_in_sequences() {
        let seq = SequenceParams::new(5e-6, 100e-6, 1);
        let s = sensor();
        let w = 2.0 * PI * 50e3;
        let one = fisher_experiment(w, 1e6, &seq, &s, 1).unwrap();
        let many = fisher_experiment(w, 1e6, &seq, &s, 500).unwrap();
        let twice = fisher_experiment(w, 1e6, &seq, &s, 1000).unwrap();
        assert_eq!(one.total, fisher_exact_sequence(w, 1e6, &seq, &s).unwrap());
        assert_eq!(many.total, 500.0 * one.total);
        assert_eq!(twice.total, 2.0 * many.total);
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(
            f_khz in 2.0_f64..300.0,
            tau_us in 1.0_f64..10.0,
            tc_us in 10.0_f64..900.0,
            phi in 0.0_f64..6.28,
            amp in 1e4_f64..2e6,
            k in 0usize..4,
        ) {
            let w = 2.0 * PI * f_khz * 1e3;
            let seq = SequenceParams::new(tau_us * 1e-6, tc_us * 1e-6, 1);
            let s = sensor();
            let b = BlockSpec::ALL[k];
            let (_, dp) = block_probability(b, w, amp, phi, &seq, &s);
            let h = 1e-7 * w;
            let fd = (block_probability(b, w + h, amp, phi, &seq, &s).0
                - block_probability(b, w - h, amp, phi, &seq, &s).0) / (2.0 * h);
            let scale = dp.abs().max(1e-6 * amp * seq.tau * (seq.t_corr + seq.tau));
            prop_assert!((dp - fd).abs() <= 1e-4 * scale, "{} vs {}", dp, fd);
        }

        #[test]
        fn information_is_non_negative(
            f_khz in 0.0_f64..1000.0,
            tau_us in 0.5_f64..20.0,
            tc_us in 1.0_f64..900.0,
            amp in 0.0_f64..1e7,
        ) {
            let seq = SequenceParams::new(tau_us * 1e-6, tc_us * 1e-6, 1);
            let v = fisher_exact_sequence(2.0 * PI * f_khz * 1e3, amp, &seq, &sensor()).unwrap();
            prop_assert!(v >= 0.0);
        }
    }
}
