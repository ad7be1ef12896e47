//! Chirped (adiabatic) inversion pulses on the target electron spin.
//!
//! The drive frequency ramps linearly across `[c − ΔF/2, c + ΔF/2]` over the
//! pulse length `t_p` at constant Rabi frequency `ν`. In the drive frame the
//! Hamiltonian is `H(t) = π ν σx + π δ(t) σz` (rad/s, frequencies in Hz),
//! integrated with a fourth-order Magnus step that stays exactly in SU(2).

use crate::error::{Error, Result};
use crate::model::TargetSpin;
use crate::quadrature::integrate;
use crate::real::Real;
use crate::sim::Trace;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

/// Rabi frequency of the target drive (Hz), from a 440 ns π pulse.
pub const DEFAULT_RABI_HZ: f64 = 1.136e6;
/// Length of the rectangular π pulse (s).
pub const PI_PULSE_DURATION: f64 = 440e-9;
/// Gaussian line standard deviation (Hz) for a 15 MHz FWHM.
pub const DEFAULT_LINE_SIGMA_HZ: f64 = 15e6 / 2.355;
/// Default chirp length (s).
pub const DEFAULT_CHIRP_DURATION: f64 = 2e-6;
/// Half-width of line averages in standard deviations.
pub const LINE_CUTOFF: f64 = 7.0;
/// Relative tolerance of each panel of a line average.
pub const LINE_REL_TOL: f64 = 1e-6;
/// Upper limit on integration steps per pulse.
pub const MAX_STEPS: usize = 50_000_000;

/// Adiabaticity factor `Q = 2πν²t_p/ΔF`.
pub fn q_factor<T: Real>(nu: T, t_p: T, span: T) -> T {
    T::TAU() * nu * nu * t_p / span
}

/// Span giving adiabaticity `q`: `ΔF = 2πν²t_p/Q`.
pub fn span_from_q<T: Real>(nu: T, t_p: T, q: T) -> T {
    T::TAU() * nu * nu * t_p / q
}

/// A linear frequency sweep. Frequencies in Hz, time in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams<T> {
    pub t_p: T,
    pub span: T,
    /// Offset of the sweep center from the spin resonance.
    pub center_detuning: T,
}

impl<T: Real> ChirpParams<T> {
    pub fn from_span(t_p: T, span: T, center_detuning: T) -> Result<Self> {
        let c = Self {
            t_p,
            span,
            center_detuning,
        };
        c.validate()?;
        Ok(c)
    }

    /// Span chosen so that the sweep has adiabaticity `q` at Rabi frequency `nu`.
    pub fn from_q(t_p: T, q: T, nu: T, center_detuning: T) -> Result<Self> {
        if !(q > T::zero() && nu > T::zero()) {
            return Err(Error::Invalid("q and nu must be positive".into()));
        }
        Self::from_span(t_p, span_from_q(nu, t_p, q), center_detuning)
    }

    /// The 1.6 µs, 2.5 MHz sweep.
    pub fn long_sweep_preset() -> Self {
        Self {
            t_p: T::lit(1.6e-6),
            span: T::lit(2.5e6),
            center_detuning: T::zero(),
        }
    }

    pub fn q(&self, nu: T) -> T {
        q_factor(nu, self.t_p, self.span)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_p > T::zero() && self.t_p.is_finite()) {
            return Err(Error::Invalid("chirp duration must be positive".into()));
        }
        if !(self.span > T::zero() && self.span.is_finite()) {
            return Err(Error::Invalid("chirp span must be positive".into()));
        }
        if !self.center_detuning.is_finite() {
            return Err(Error::NonFinite("center_detuning"));
        }
        Ok(())
    }
}

/// `exp(−i v·σ)` applied to a spinor.
fn apply_rotation<T: Real>(v: [T; 3], psi: [Complex<T>; 2]) -> [Complex<T>; 2] {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm == T::zero() {
        return psi;
    }
    let (s, c) = norm.sin_cos();
    let k = s / norm;
    let (x, y, z) = (v[0] * k, v[1] * k, v[2] * k);
    let i = Complex::new(T::zero(), T::one());
    let m00 = Complex::new(c, -z);
    let m11 = Complex::new(c, z);
    let m01 = -i * Complex::new(x, -y);
    let m10 = -i * Complex::new(x, y);
    [m00 * psi[0] + m01 * psi[1], m10 * psi[0] + m11 * psi[1]]
}

fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Step count for a sweep: `h ≤ 1/(50·max(ν, ΔF, |δ|max))`.
fn step_count<T: Real>(chirp: &ChirpParams<T>, nu: T, offset: T) -> Result<usize> {
    let fastest = nu
        .max(chirp.span)
        .max(offset.abs() + chirp.span / T::lit(2.0));
    let needed = (chirp.t_p * T::lit(50.0) * fastest).ceil().as_f64();
    if !needed.is_finite() || needed > MAX_STEPS as f64 {
        return Err(Error::StepOverflow {
            needed: if needed.is_finite() { needed as u64 } else { u64::MAX },
            limit: MAX_STEPS as u64,
        });
    }
    Ok((needed as usize).max(16))
}

/// Final spinor after the sweep, starting from `|0⟩`.
pub fn evolve_sweep<T: Real>(chirp: &ChirpParams<T>, nu: T, detuning: T) -> Result<[Complex<T>; 2]> {
    chirp.validate()?;
    if !(nu >= T::zero()) || !detuning.is_finite() {
        return Err(Error::Invalid("Rabi frequency must be non-negative and detuning finite".into()));
    }
    let offset = detuning + chirp.center_detuning;
    let n = step_count(chirp, nu, offset)?;
    let h = chirp.t_p / T::from_usize(n).unwrap();
    let pi = T::PI();
    let half = T::lit(0.5);
    let g = T::lit(3f64.sqrt() / 6.0);
    let field = |t: T| -> [T; 3] {
        let delta = offset - chirp.span * (t / chirp.t_p - half);
        [pi * nu, T::zero(), pi * delta]
    };
    let comm = T::lit(3f64.sqrt() / 6.0) * h * h;
    let mut psi = [Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero())];
    for k in 0..n {
        let t0 = T::from_usize(k).unwrap() * h;
        let a1 = field(t0 + (half - g) * h);
        let a2 = field(t0 + (half + g) * h);
        let c = cross(a2, a1);
        let v = [
            half * h * (a1[0] + a2[0]) + comm * c[0],
            half * h * (a1[1] + a2[1]) + comm * c[1],
            half * h * (a1[2] + a2[2]) + comm * c[2],
        ];
        psi = apply_rotation(v, psi);
    }
    Ok(psi)
}

/// Probability that a spin detuned by `detuning` (Hz) from the sweep center
/// is inverted by the chirp.
pub fn lz_flip_probability<T: Real>(chirp: &ChirpParams<T>, nu: T, detuning: T) -> Result<T> {
    let psi = evolve_sweep(chirp, nu, detuning)?;
    Ok(psi[1].norm_sqr().max(T::zero()).min(T::one()))
}

/// Asymptotic Landau–Zener inversion `1 − e^(−πQ/2)`.
pub fn landau_zener<T: Real>(q: T) -> T {
    T::one() - (-T::PI() * q / T::lit(2.0)).exp()
}

/// Inversion by a rectangular pulse of Rabi frequency `nu` and length
/// `duration` at detuning `detuning` (all Hz and s):
/// `ν²/(ν²+δ²)·sin²(π√(ν²+δ²)·t)`.
pub fn pi_pulse_flip<T: Real>(nu: T, duration: T, detuning: T) -> T {
    let w2 = nu * nu + detuning * detuning;
    if w2 == T::zero() {
        return T::zero();
    }
    let s = (T::PI() * w2.sqrt() * duration).sin();
    nu * nu / w2 * s * s
}

/// Mean of `f(δ)` over a Gaussian line `δ ~ N(0, σ²)`.
///
/// The density is integrated over `±LINE_CUTOFF·σ`, split into panels of
/// width `σ/4` that are each refined adaptively, so sharp features of `f`
/// narrower than the line are resolved.
pub fn line_average(sigma: f64, f: impl Fn(f64) -> Result<f64> + Sync) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Invalid("line width must be non-negative".into()));
    }
    if sigma == 0.0 {
        return f(0.0);
    }
    let panels = (LINE_CUTOFF * 8.0) as usize;
    let width = 2.0 * LINE_CUTOFF / panels as f64;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let parts = (0..panels)
        .into_par_iter()
        .map(|k| {
            let failure = Cell::new(None);
            let g = |x: f64| match f(sigma * x) {
                Ok(v) => v * (-0.5 * x * x).exp() / norm,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            };
            let a = -LINE_CUTOFF + width * k as f64;
            let r = integrate(g, a, a + width, LINE_REL_TOL)?;
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(r.value),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().sum())
}

/// Chirp inversion averaged over a Gaussian line of width `line_sigma` (Hz).
pub fn ensemble_flip(chirp: &ChirpParams<f64>, nu: f64, line_sigma: f64) -> Result<f64> {
    line_average(line_sigma, |d| lz_flip_probability(chirp, nu, d))
}

/// One point of a contrast-versus-adiabaticity curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub q: f64,
    pub span: f64,
    pub flip: f64,
    pub contrast: f64,
}

/// Predicted difference-channel dipolar contrast for each adiabaticity at a
/// fixed pulse length. The oscillation amplitude of the difference channel
/// equals the flip probability times the sensor contrast.
pub fn contrast_vs_q(t_p: f64, qs: &[f64], nu: f64, line_sigma: f64, contrast: f64) -> Result<Vec<QPoint>> {
    if qs.is_empty() {
        return Err(Error::EmptyGrid("q"));
    }
    qs.iter()
        .map(|&q| {
            let chirp = ChirpParams::from_q(t_p, q, nu, 0.0)?;
            let flip = ensemble_flip(&chirp, nu, line_sigma)?;
            Ok(QPoint {
                q,
                span: chirp.span,
                flip,
                contrast: contrast * flip,
            })
        })
        .collect()
}

/// Pulse applied to the target in a frequency scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseKind {
    /// Rectangular pulse of the given length (s).
    Pi { duration: f64 },
    Chirp(ChirpParams<f64>),
}

impl PulseKind {
    /// Inversion of a spin detuned by `detuning` (Hz) from the drive center.
    pub fn flip(&self, nu: f64, detuning: f64) -> Result<f64> {
        match self {
            PulseKind::Pi { duration } => Ok(pi_pulse_flip(nu, *duration, detuning)),
            PulseKind::Chirp(c) => lz_flip_probability(c, nu, detuning),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PulseKind::Pi { .. } => "pi",
            PulseKind::Chirp(_) => "chirp",
        }
    }
}

/// Line-averaged inversion versus drive center frequency (Hz).
///
/// Channels: `flip` (inverted fraction) and `signal = 1 − flip`, so the
/// dip depth equals the peak flip fraction.
pub fn deer_frequency_scan(drive: &[f64], pulse: PulseKind, target: &TargetSpin<f64>) -> Result<Trace> {
    target.validate()?;
    if drive.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("drive frequency grid must be strictly increasing".into()));
    }
    let flips = drive
        .iter()
        .map(|&f| {
            let offset = target.larmor_freq - f;
            line_average(target.line_sigma, |d| pulse.flip(target.rabi, offset + d))
        })
        .collect::<Result<Vec<_>>>()?;
    let zeros = vec![0.0; drive.len()];
    let mut t = Trace::new("drive_freq_hz", drive.to_vec());
    t.push_channel("flip", flips.clone(), zeros.clone())?;
    t.push_channel("signal", flips.iter().map(|p| 1.0 - p).collect(), zeros)?;
    t.metadata.insert("pulse".into(), pulse.label().into());
    t.metadata.insert("target".into(), serde_json::to_string(target)?);
    Ok(t)
}

/// Depth of a scan's dip: the largest flip fraction.
pub fn dip_contrast(scan: &Trace) -> f64 {
    scan.channel("flip")
        .map(|c| c.mean.iter().cloned().fold(0.0, f64::max))
        .unwrap_or(0.0)
}

/// Width of the region where the flip fraction exceeds half its maximum (Hz).
pub fn dip_full_width(scan: &Trace) -> f64 {
    let Some(c) = scan.channel("flip") else {
        return 0.0;
    };
    let half = dip_contrast(scan) / 2.0;
    let inside: Vec<f64> = scan
        .x
        .iter()
        .zip(&c.mean)
        .filter(|(_, &p)| p >= half)
        .map(|(&x, _)| x)
        .collect();
    match (inside.first(), inside.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn q_of_long_sweep_preset() {
        let c = ChirpParams::<f64>::long_sweep_preset();
        let q = c.q(DEFAULT_RABI_HZ);
        assert!((q - 5.2).abs() < 0.1, "{q}");
    }

    #[test]
    fn q_vanishes_for_wide_span() {
        assert!(q_factor(1e6, 2e-6, 1e30) < 1e-15);
    }

    #[test]
    fn adiabatic_limit_inverts() {
        let nu = 1e6;
        let span = 100.0 * nu;
        let t_p = 50.0 * span / (2.0 * std::f64::consts::PI * nu * nu);
        let c = ChirpParams::from_span(t_p, span, 0.0).unwrap();
        assert!(lz_flip_probability(&c, nu, 0.0).unwrap() >= 0.999);
    }

    #[test]
    fn far_off_sweep_spin_is_barely_driven() {
        let nu = 0.2e6;
        let c = ChirpParams::from_span(2e-6, 20e6, 0.0).unwrap();
        assert!(lz_flip_probability(&c, nu, 20e6).unwrap() < 0.1);
    }

    #[test]
    fn landau_zener_limit_with_wide_span() {
        let nu = 1e6;
        for q in [1.0, 5.0] {
            let span = 200.0 * nu;
            let t_p = q * span / (2.0 * std::f64::consts::PI * nu * nu);
            let c = ChirpParams::from_span(t_p, span, 0.0).unwrap();
            let p = lz_flip_probability(&c, nu, 0.0).unwrap();
            assert!((p - landau_zener(q)).abs() < 0.02, "Q={q}: {p}");
        }
    }

    #[test]
    fn sweep_is_unitary() {
        let c = ChirpParams::from_span(2e-6, 8e6, 1e6).unwrap();
        let psi = evolve_sweep(&c, 1.136e6f64, 3e6).unwrap();
        assert!((psi[0].norm_sqr() + psi[1].norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn f32_sweep_agrees_with_f64() {
        let c64 = ChirpParams::from_span(1e-6, 5e6, 0.0).unwrap();
        let c32 = ChirpParams::<f32>::from_span(1e-6, 5e6, 0.0).unwrap();
        let a = lz_flip_probability(&c64, 1e6, 0.5e6).unwrap();
        let b = lz_flip_probability(&c32, 1e6f32, 0.5e6).unwrap();
        assert!((a - b as f64).abs() < 1e-3);
    }

    #[test]
    fn step_guard_triggers() {
        let c = ChirpParams::from_span(1.0, 1e9, 0.0).unwrap();
        assert!(matches!(
            lz_flip_probability(&c, 1e6, 0.0),
            Err(Error::StepOverflow { .. })
        ));
    }

    #[test]
    fn line_average_integrates_moments() {
        let sigma = 3e6;
        let m0 = line_average(sigma, |_| Ok(1.0)).unwrap();
        let m2 = line_average(sigma, |d| Ok(d * d)).unwrap();
        let box_fraction = line_average(sigma, |d| Ok(if d.abs() <= sigma { 1.0 } else { 0.0 })).unwrap();
        assert!((m0 - 1.0).abs() < 1e-9);
        assert!((m2 / (sigma * sigma) - 1.0).abs() < 1e-9);
        assert!((box_fraction - 0.682_689_492_137_085_9).abs() < 1e-6);
    }

    #[test]
    fn narrow_line_equals_resonant_flip() {
        let c = ChirpParams::from_q(2e-6, 5.0, DEFAULT_RABI_HZ, 0.0).unwrap();
        let a = ensemble_flip(&c, DEFAULT_RABI_HZ, 0.0).unwrap();
        let b = lz_flip_probability(&c, DEFAULT_RABI_HZ, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_q_gives_single_point() {
        let r = contrast_vs_q(2e-6, &[5.0], DEFAULT_RABI_HZ, 1e6, 1.0).unwrap();
        assert_eq!(r.len(), 1);
        assert!(contrast_vs_q(2e-6, &[], DEFAULT_RABI_HZ, 1e6, 1.0).is_err());
    }

    #[test]
    fn pi_pulse_resonant_inversion() {
        let nu = DEFAULT_RABI_HZ;
        assert!((pi_pulse_flip(nu, 0.5 / nu, 0.0) - 1.0).abs() < 1e-12);
        assert!(pi_pulse_flip(nu, PI_PULSE_DURATION, 20e6) < 0.01);
    }

    #[test]
    fn scan_dip_is_centered_and_wider_than_pulse() {
        let target = TargetSpin {
            larmor_freq: 2.8e9,
            line_sigma: 0.3e6,
            ..TargetSpin::default()
        };
        let drive: Vec<f64> = (0..81).map(|k| 2.8e9 - 8e6 + 0.2e6 * k as f64).collect();
        let pulse = PulseKind::Pi {
            duration: PI_PULSE_DURATION,
        };
        let scan = deer_frequency_scan(&drive, pulse, &target).unwrap();
        let flip = &scan.channel("flip").unwrap().mean;
        let k = flip
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(k, 40);
        assert!(dip_full_width(&scan) >= 1.0 / PI_PULSE_DURATION * 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn span_round_trip(nu in 1e5_f64..1e7, t_p in 1e-7_f64..1e-5, span in 1e5_f64..1e8) {
            let q = q_factor(nu, t_p, span);
            prop_assert!((span_from_q(nu, t_p, q) - span).abs() <= 1e-12 * span);
        }

        #[test]
        fn coverage_does_not_grow_with_line_width(s1 in 0.5e6_f64..5e6, extra in 0.5e6_f64..10e6) {
            let c = ChirpParams::from_q(2e-6, 5.0, DEFAULT_RABI_HZ, 0.0).unwrap();
            let a = ensemble_flip(&c, DEFAULT_RABI_HZ, s1).unwrap();
            let b = ensemble_flip(&c, DEFAULT_RABI_HZ, s1 + extra).unwrap();
            prop_assert!(b <= a + 1e-3, "{} then {}", a, b);
        }
    }
}
