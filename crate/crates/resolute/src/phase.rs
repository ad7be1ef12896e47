//! Accumulated phases for Ramsey, Hahn echo and the correlation sequence.
//!
//! A tone `A sin(ωt + φ)` is integrated over each protocol's sensing
//! windows. The closed forms below are checked against adaptive quadrature
//! of the defining integrals.

use crate::error::Result;
use crate::model::{SequenceParams, ToneSignal};
use crate::quadrature::{integrate, DEFAULT_REL_TOL};
use crate::real::{sinc, sinc_prime, Real};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Phase combination formed from the two sensing windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Φ₁ − Φ₂, read out as S⁻.
    Diff,
    /// Φ₁ + Φ₂, read out as S⁺.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Ramsey,
    HahnEcho,
    Resolute,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Diff => "diff",
            Channel::Sum => "sum",
        })
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Ramsey => "ramsey",
            Protocol::HahnEcho => "hahn",
            Protocol::Resolute => "resolute",
        })
    }
}

impl FromStr for Channel {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "diff" | "minus" => Ok(Channel::Diff),
            "sum" | "plus" => Ok(Channel::Sum),
            _ => Err(crate::error::Error::Parse(format!("unknown channel '{s}'"))),
        }
    }
}

impl FromStr for Protocol {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ramsey" => Ok(Protocol::Ramsey),
            "hahn" | "hahnecho" | "hahn_echo" | "echo" => Ok(Protocol::HahnEcho),
            "resolute" => Ok(Protocol::Resolute),
            _ => Err(crate::error::Error::Parse(format!("unknown protocol '{s}'"))),
        }
    }
}

fn two<T: Real>() -> T {
    T::lit(2.0)
}

/// `A ∫_start^end sin(ωt + φ) dt`.
pub fn window_phase<T: Real>(amplitude: T, omega: T, phi: T, start: T, end: T) -> T {
    let len = end - start;
    let mid = (start + end) / two();
    amplitude * len * sinc(omega * len / two()) * (omega * mid + phi).sin()
}

/// ∂/∂ω of [`window_phase`].
pub fn window_phase_domega<T: Real>(amplitude: T, omega: T, phi: T, start: T, end: T) -> T {
    let len = end - start;
    let mid = (start + end) / two();
    let x = omega * len / two();
    let arg = omega * mid + phi;
    amplitude * len * (sinc_prime(x) * len / two() * arg.sin() + sinc(x) * mid * arg.cos())
}

/// The two sensing windows `[0, τ/2]` and `[T_corr + τ/2, T_corr + τ]`.
pub fn resolute_windows<T: Real>(seq: &SequenceParams<T>) -> [(T, T); 2] {
    let half = seq.tau / two();
    [
        (T::zero(), half),
        (seq.t_corr + half, seq.t_corr + seq.tau),
    ]
}

/// Per-window phases (φ₁, φ₂) of the tone at a fixed phase.
pub fn resolute_window_phases<T: Real>(
    amplitude: T,
    omega: T,
    phi: T,
    seq: &SequenceParams<T>,
) -> (T, T) {
    let [w1, w2] = resolute_windows(seq);
    (
        window_phase(amplitude, omega, phi, w1.0, w1.1),
        window_phase(amplitude, omega, phi, w2.0, w2.1),
    )
}

/// ∂(φ₁, φ₂)/∂ω.
pub fn resolute_window_phases_domega<T: Real>(
    amplitude: T,
    omega: T,
    phi: T,
    seq: &SequenceParams<T>,
) -> (T, T) {
    let [w1, w2] = resolute_windows(seq);
    (
        window_phase_domega(amplitude, omega, phi, w1.0, w1.1),
        window_phase_domega(amplitude, omega, phi, w2.0, w2.1),
    )
}

/// Closed-form phase of the correlation sequence.
///
/// Sum: `Aτ sin(ωT_c/2 + ωτ/2 + φ) cos(ωT_c/2 + ωτ/4) sinc(ωτ/4)`.
/// Diff: `−Aτ sinc(ωτ/4) sin(ωT_c/2 + ωτ/4) cos(ωT_c/2 + ωτ/2 + φ)`.
pub fn resolute_phase_closed<T: Real>(
    tone: &ToneSignal<T>,
    seq: &SequenceParams<T>,
    channel: Channel,
) -> Result<T> {
    let phi = tone.fixed_phase()?;
    let (a, w, tau, tc) = (tone.amplitude, tone.omega, seq.tau, seq.t_corr);
    let four = T::lit(4.0);
    let s = sinc(w * tau / four);
    let outer = w * tc / two() + w * tau / two() + phi;
    let inner = w * tc / two() + w * tau / four;
    Ok(match channel {
        Channel::Sum => a * tau * outer.sin() * inner.cos() * s,
        Channel::Diff => -a * tau * s * inner.sin() * outer.cos(),
    })
}

/// Closed-form Ramsey phase over `[0, τ_R]`: `Aτ_R sin(ωτ_R/2 + φ) sinc(ωτ_R/2)`.
pub fn ramsey_phase_closed<T: Real>(tone: &ToneSignal<T>, tau_r: T) -> Result<T> {
    let phi = tone.fixed_phase()?;
    let x = tone.omega * tau_r / two();
    Ok(tone.amplitude * tau_r * (x + phi).sin() * sinc(x))
}

/// Closed-form Hahn-echo phase, `+` on `[0, τ/2]` and `−` on `[τ/2, τ]`:
/// `−Aτ cos(ωτ/2 + φ) sin(ωτ/4) sinc(ωτ/4)`.
pub fn hahn_phase_closed<T: Real>(tone: &ToneSignal<T>, tau_he: T) -> Result<T> {
    let phi = tone.fixed_phase()?;
    let q = tone.omega * tau_he / T::lit(4.0);
    Ok(-tone.amplitude * tau_he * (tone.omega * tau_he / two() + phi).cos() * q.sin() * sinc(q))
}

/// Dispatches to the protocol's closed form. The channel only matters for
/// the correlation sequence.
pub fn phase_closed<T: Real>(
    tone: &ToneSignal<T>,
    seq: &SequenceParams<T>,
    protocol: Protocol,
    channel: Channel,
) -> Result<T> {
    match protocol {
        Protocol::Ramsey => ramsey_phase_closed(tone, seq.tau),
        Protocol::HahnEcho => hahn_phase_closed(tone, seq.tau),
        Protocol::Resolute => resolute_phase_closed(tone, seq, channel),
    }
}

/// Phase by adaptive quadrature of the defining integrals.
///
/// Ramsey integrates over `[0, τ]`; Hahn echo adds `[0, τ/2]` and subtracts
/// `[τ/2, τ]`; the correlation sequence integrates both windows and
/// combines them per channel.
pub fn phase_integral<T: Real>(
    tone: &ToneSignal<T>,
    seq: &SequenceParams<T>,
    protocol: Protocol,
    channel: Channel,
) -> Result<T> {
    let phi = tone.fixed_phase()?;
    let (a, w) = (tone.amplitude, tone.omega);
    let f = move |t: T| a * (w * t + phi).sin();
    let tol = T::lit(DEFAULT_REL_TOL);
    let tau = seq.tau;
    let value = match protocol {
        Protocol::Ramsey => integrate(f, T::zero(), tau, tol)?.value,
        Protocol::HahnEcho => {
            let first = integrate(f, T::zero(), tau / two(), tol)?.value;
            let second = integrate(f, tau / two(), tau, tol)?.value;
            first - second
        }
        Protocol::Resolute => {
            let [w1, w2] = resolute_windows(seq);
            let p1 = integrate(f, w1.0, w1.1, tol)?.value;
            let p2 = integrate(f, w2.0, w2.1, tol)?.value;
            match channel {
                Channel::Diff => p1 - p2,
                Channel::Sum => p1 + p2,
            }
        }
    };
    if !value.is_finite() {
        return Err(crate::error::Error::NonFinite("phase_integral"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(a: f64, w: f64, phi: f64) -> ToneSignal<f64> {
        ToneSignal::new(a, w, Some(phi))
    }

    #[test]
    fn dc_cancels_in_diff_channel() {
        let seq = SequenceParams::new(4e-6, 20e-6, 1);
        for phi in [0.0, 0.4, PI / 2.0, 5.0] {
            let t = tone(1.0, 0.0, phi);
            assert_eq!(resolute_phase_closed(&t, &seq, Channel::Diff).unwrap(), 0.0);
            let q = phase_integral(&t, &seq, Protocol::Resolute, Channel::Diff).unwrap();
            assert!(q.abs() < 1e-20);
        }
    }

    #[test]
    fn dc_accumulates_in_sum_channel() {
        let seq = SequenceParams::new(4e-6, 20e-6, 1);
        let t = tone(1.0, 0.0, PI / 2.0);
        let q = phase_integral(&t, &seq, Protocol::Resolute, Channel::Sum).unwrap();
        assert!((q - 4e-6).abs() < 1e-18);
        let c = resolute_phase_closed(&t, &seq, Channel::Sum).unwrap();
        assert!((c - 4e-6).abs() < 1e-18);
        let t0 = tone(1.0, 0.0, 0.0);
        assert_eq!(resolute_phase_closed(&t0, &seq, Channel::Sum).unwrap(), 0.0);
    }

    #[test]
    fn diff_vanishes_at_full_period() {
        let seq = SequenceParams::new(5e-6, 95e-6, 1);
        let w = 2.0 * PI / (seq.t_corr + seq.tau / 2.0);
        for phi in [0.0, 1.0, 2.5, 4.0] {
            let t = tone(3e5, w, phi);
            let c = resolute_phase_closed(&t, &seq, Channel::Diff).unwrap();
            let q = phase_integral(&t, &seq, Protocol::Resolute, Channel::Diff).unwrap();
            assert!(c.abs() < 1e-15, "{c}");
            assert!(q.abs() < 1e-12, "{q}");
        }
    }

    #[test]
    fn sum_equals_printed_form_term_by_term() {
        let (a, w, phi, tau, tc) = (2.3e5, 2.0 * PI * 71e3, 0.77, 5.5e-6, 41e-6);
        let printed = a
            * tau
            * (w * tc / 2.0 + w * tau / 2.0 + phi).sin()
            * (w * tc / 2.0 + w * tau / 4.0).cos()
            * sinc(w * tau / 4.0);
        let seq = SequenceParams::new(tau, tc, 1);
        let c = resolute_phase_closed(&tone(a, w, phi), &seq, Channel::Sum).unwrap();
        assert_eq!(c, printed);
        let (p1, p2) = resolute_window_phases(a, w, phi, &seq);
        assert!((p1 + p2 - printed).abs() < 1e-12 * printed.abs().max(1e-6));
    }

    #[test]
    fn ramsey_examples() {
        let tau = 0.5e-6;
        let at_quarter = tone(2.0, 0.0, PI / 2.0);
        assert!((ramsey_phase_closed(&at_quarter, tau).unwrap() - 2.0 * tau).abs() < 1e-20);
        assert_eq!(ramsey_phase_closed(&tone(2.0, 0.0, 0.0), tau).unwrap(), 0.0);
    }

    #[test]
    fn hahn_examples() {
        let tau = 4e-6;
        for phi in [0.0, 1.2, 3.0] {
            assert_eq!(hahn_phase_closed(&tone(1e5, 0.0, phi), tau).unwrap(), 0.0);
        }
        let w = 2.0 * PI / tau;
        let v = hahn_phase_closed(&tone(1e5, w, PI / 2.0), tau).unwrap();
        assert!(v.abs() < 1e-15, "{v}");
    }

    #[test]
    fn closed_forms_match_quadrature_on_samples() {
        let seq = SequenceParams::new(6e-6, 37e-6, 1);
        for (w, phi) in [(2.0 * PI * 53e3, 0.3), (2.0 * PI * 1.3e6, 4.4), (1.0, 2.0)] {
            let t = tone(7e5, w, phi);
            for (p, c) in [
                (Protocol::Ramsey, Channel::Sum),
                (Protocol::HahnEcho, Channel::Sum),
                (Protocol::Resolute, Channel::Sum),
                (Protocol::Resolute, Channel::Diff),
            ] {
                let closed = phase_closed(&t, &seq, p, c).unwrap();
                let quad = phase_integral(&t, &seq, p, c).unwrap();
                assert!((closed - quad).abs() <= 1e-10 * 7e5 * 12e-6, "{p} {c}");
            }
        }
    }

    #[test]
    fn window_derivative_matches_finite_difference() {
        let (a, phi, s, e) = (1e6, 0.9, 40e-6, 43e-6);
        for w in [0.0, 1e3, 2.0 * PI * 69e3, 2.0 * PI * 2e6] {
            let h = if w == 0.0 { 1e-3 } else { 1e-6 * w };
            let fd = (window_phase(a, w + h, phi, s, e) - window_phase(a, w - h, phi, s, e)) / (2.0 * h);
            let an = window_phase_domega(a, w, phi, s, e);
            assert!((an - fd).abs() <= 1e-6 * an.abs().max(1e-12), "w={w} {an} {fd}");
        }
    }

    #[test]
    fn random_phase_is_rejected() {
        let t = ToneSignal::new(1.0, 1.0, None);
        let seq = SequenceParams::new(1e-6, 2e-6, 1);
        assert!(resolute_phase_closed(&t, &seq, Channel::Sum).is_err());
    }

    #[test]
    fn single_precision_closed_form() {
        let t = ToneSignal::new(1e5_f32, 2.0 * std::f32::consts::PI * 5e4, Some(0.5));
        let seq = SequenceParams::new(5e-6_f32, 20e-6, 1);
        let c = resolute_phase_closed(&t, &seq, Channel::Diff).unwrap();
        let t64 = tone(1e5, 2.0 * PI * 5e4, 0.5);
        let seq64 = SequenceParams::new(5e-6, 20e-6, 1);
        let c64 = resolute_phase_closed(&t64, &seq64, Channel::Diff).unwrap();
        assert!((c as f64 - c64).abs() < 1e-4 * c64.abs().max(1e-3));
    }
}
