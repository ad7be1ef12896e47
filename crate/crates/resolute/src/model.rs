//! Shared domain types, validation and physical constants.

use crate::error::{Error, Result};
use crate::real::Real;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// γ/2π of ¹³C in Hz per Gauss.
pub const GAMMA_C13_HZ_PER_G: f64 = 1.0705e3;
/// γ/2π of a free electron (and the NV electron spin) in Hz per Gauss.
pub const GAMMA_E_HZ_PER_G: f64 = 2.8025e6;

/// Probe coherence and readout parameters. Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams<T> {
    pub t1: T,
    pub t2_star: T,
    pub t2_hahn: T,
    pub t2_p: T,
    pub contrast: T,
    pub overhead: T,
    /// NV gyromagnetic ratio in rad s⁻¹ G⁻¹.
    pub gamma_nv: T,
}

impl<T: Real> Default for SensorParams<T> {
    fn default() -> Self {
        Self {
            t1: T::lit(1000e-6),
            t2_star: T::lit(0.38e-6),
            t2_hahn: T::lit(4.3e-6),
            t2_p: T::lit(5.1e-6),
            contrast: T::one(),
            overhead: T::lit(3e-6),
            gamma_nv: T::lit(2.0 * std::f64::consts::PI * GAMMA_E_HZ_PER_G),
        }
    }
}

impl<T: Real> SensorParams<T> {
    /// Returns `Ok(())` when every invariant holds, otherwise the first violation.
    pub fn validate(&self) -> Result<()> {
        let times = [
            ("T1", self.t1),
            ("T2*", self.t2_star),
            ("T2", self.t2_hahn),
            ("T2p", self.t2_p),
        ];
        for (name, t) in times {
            if !(t > T::zero()) || !t.is_finite() {
                return Err(Error::Invalid(format!("{name} must be positive and finite")));
            }
        }
        if !(self.overhead >= T::zero()) {
            return Err(Error::Invalid("overhead must be non-negative".into()));
        }
        if self.t2_star > self.t2_hahn {
            return Err(Error::Invalid("T2* exceeds T2".into()));
        }
        if self.t2_hahn > self.t1 {
            return Err(Error::Invalid("T2 exceeds T1".into()));
        }
        if self.t2_p > self.t1 {
            return Err(Error::Invalid("T2p exceeds T1".into()));
        }
        if !(self.contrast > T::zero() && self.contrast <= T::one()) {
            return Err(Error::Invalid("contrast out of range".into()));
        }
        if !(self.gamma_nv > T::zero()) {
            return Err(Error::Invalid("gamma_nv must be positive".into()));
        }
        Ok(())
    }
}

/// Validates sensor parameters, returning them unchanged on success.
pub fn validate_sensor<T: Real>(params: SensorParams<T>) -> Result<SensorParams<T>> {
    params.validate()?;
    Ok(params)
}

/// Pure tone `A sin(ωt + φ)` expressed as a phase-accumulation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSignal<T> {
    /// Peak phase-accumulation rate in rad/s.
    pub amplitude: T,
    /// Angular frequency in rad/s.
    pub omega: T,
    /// Fixed phase in rad; `None` draws a fresh phase per sequence.
    pub phi: Option<T>,
}

impl<T: Real> ToneSignal<T> {
    pub fn new(amplitude: T, omega: T, phi: Option<T>) -> Self {
        Self {
            amplitude,
            omega,
            phi,
        }
    }

    pub fn with_phase(self, phi: T) -> Self {
        Self {
            phi: Some(phi),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= T::zero()) || !self.amplitude.is_finite() {
            return Err(Error::Invalid("tone amplitude must be non-negative".into()));
        }
        if !(self.omega >= T::zero()) || !self.omega.is_finite() {
            return Err(Error::Invalid("tone omega must be non-negative".into()));
        }
        if let Some(phi) = self.phi {
            if !(phi >= T::zero() && phi < T::TAU()) {
                return Err(Error::Invalid("tone phi must lie in [0, 2π)".into()));
            }
        }
        Ok(())
    }

    /// The phase, or an error when it is left random.
    pub fn fixed_phase(&self) -> Result<T> {
        self.phi
            .ok_or_else(|| Error::Invalid("tone phase must be fixed for this operation".into()))
    }
}

/// Static phase rates (rad/s) that accumulate identically in every window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DcTerms<T> {
    pub detuning: T,
    pub hyperfine: T,
    pub dipolar: T,
}

impl<T: Real> DcTerms<T> {
    pub fn total(&self) -> T {
        self.detuning + self.hyperfine + self.dipolar
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.detuning.is_finite() && self.hyperfine.is_finite() && self.dipolar.is_finite()) {
            return Err(Error::Invalid("DC terms must be finite".into()));
        }
        if self.dipolar < T::zero() {
            return Err(Error::Invalid("dipolar coupling must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gaussian field-noise scales. `α = ∞` switches a component off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams<T> {
    /// Inverse-variance scale of slow noise correlated across windows (s²).
    pub alpha_corr: T,
    /// Inverse-variance scale of fast noise independent per window (s²).
    pub alpha_fast: T,
    pub seed: u64,
}

impl<T: Real> Default for NoiseParams<T> {
    fn default() -> Self {
        Self::noiseless(0)
    }
}

impl<T: Real> NoiseParams<T> {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            alpha_corr: T::infinity(),
            alpha_fast: T::infinity(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_corr > T::zero()) {
            return Err(Error::Invalid("alpha_corr must be positive".into()));
        }
        if !(self.alpha_fast > T::zero()) {
            return Err(Error::Invalid("alpha_fast must be positive".into()));
        }
        Ok(())
    }

    /// Variance (rad²/s²) of the per-window fast rate δb.
    pub fn fast_variance(&self) -> T {
        self.alpha_fast.recip()
    }

    /// Variance (rad²/s²) of the shared rate δB_corr.
    ///
    /// Chosen so the Sum channel decays as `exp(-τ²/α₁)` when combined with
    /// the fast component. Negative values are clamped to zero.
    pub fn corr_variance(&self) -> T {
        let v = T::lit(2.0) / self.alpha_corr - T::lit(0.5) / self.alpha_fast;
        v.max(T::zero())
    }

    /// True when the requested `α₁` is too small to be met given `α₂`.
    pub fn corr_clamped(&self) -> bool {
        T::lit(2.0) / self.alpha_corr < T::lit(0.5) / self.alpha_fast
    }

    /// Scales that give a Gaussian Ramsey decay time `t2_star` and a Diff
    /// channel 1/e time `t2_p`.
    pub fn from_decay_times(t2_star: T, t2_p: T, seed: u64) -> Result<Self> {
        let alpha_fast = t2_p * t2_p / T::lit(4.0);
        let var_fast = alpha_fast.recip();
        let var_corr = T::lit(2.0) / (t2_star * t2_star) - var_fast;
        if var_corr < T::zero() {
            return Err(Error::Invalid("T2* too long for the requested T2p".into()));
        }
        let alpha_corr = T::lit(2.0) / (var_corr + var_fast / T::lit(2.0));
        Ok(Self {
            alpha_corr,
            alpha_fast,
            seed,
        })
    }
}

/// Timing of one sequence. Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams<T> {
    /// Total sensing time, split into two windows of τ/2.
    pub tau: T,
    pub t_corr: T,
    pub n_reps: usize,
}

impl<T: Real> SequenceParams<T> {
    pub fn new(tau: T, t_corr: T, n_reps: usize) -> Self {
        Self { tau, t_corr, n_reps }
    }

    /// Checks hard invariants and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::Invalid("tau must be positive".into()));
        }
        if !(self.t_corr > T::zero()) || !self.t_corr.is_finite() {
            return Err(Error::Invalid("t_corr must be positive".into()));
        }
        if self.n_reps < 1 {
            return Err(Error::Invalid("n_reps must be at least 1".into()));
        }
        let mut warnings = Vec::new();
        if self.t_corr <= self.tau {
            let msg = format!(
                "t_corr ({:.4e} s) does not exceed tau ({:.4e} s)",
                self.t_corr.as_f64(),
                self.tau.as_f64()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }

    pub fn check_against(&self, sensor: &SensorParams<T>) -> Result<()> {
        if self.t_corr >= sensor.t1 {
            return Err(Error::Invalid("t_corr must be shorter than T1".into()));
        }
        Ok(())
    }
}

/// T̃ = T_corr + τ/2.
pub fn effective_period<T: Real>(seq: &SequenceParams<T>) -> T {
    seq.t_corr + seq.tau / T::lit(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MiddlePhase {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadoutSign {
    Plus,
    Minus,
}

impl ReadoutSign {
    pub fn value<T: Real>(self) -> T {
        match self {
            ReadoutSign::Plus => T::one(),
            ReadoutSign::Minus => -T::one(),
        }
    }
}

/// One phase-cycled block: the middle π/2 pair's axis and the readout sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub middle_phase: MiddlePhase,
    pub readout_sign: ReadoutSign,
}

impl BlockSpec {
    /// The four blocks of a full measurement in their fixed order:
    /// (X,+), (X,−), (Y,+), (Y,−).
    pub const ALL: [BlockSpec; 4] = [
        BlockSpec {
            middle_phase: MiddlePhase::X,
            readout_sign: ReadoutSign::Plus,
        },
        BlockSpec {
            middle_phase: MiddlePhase::X,
            readout_sign: ReadoutSign::Minus,
        },
        BlockSpec {
            middle_phase: MiddlePhase::Y,
            readout_sign: ReadoutSign::Plus,
        },
        BlockSpec {
            middle_phase: MiddlePhase::Y,
            readout_sign: ReadoutSign::Minus,
        },
    ];

    pub fn label(&self) -> &'static str {
        match (self.middle_phase, self.readout_sign) {
            (MiddlePhase::X, ReadoutSign::Plus) => "X+",
            (MiddlePhase::X, ReadoutSign::Minus) => "X-",
            (MiddlePhase::Y, ReadoutSign::Plus) => "Y+",
            (MiddlePhase::Y, ReadoutSign::Minus) => "Y-",
        }
    }
}

/// Target electron spin driven during the correlation period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpin<T> {
    /// Larmor frequency in Hz.
    pub larmor_freq: T,
    /// Dipolar coupling ω_dd in rad/s.
    pub dipolar: T,
    /// Standard deviation of the Gaussian line in Hz.
    pub line_sigma: T,
    /// Rabi frequency ν in Hz.
    pub rabi: T,
}

impl<T: Real> Default for TargetSpin<T> {
    /// 2.8 GHz line, `ω_dd/2π = 0.6 MHz`, 15 MHz FWHM, `ν = 1.136 MHz`.
    fn default() -> Self {
        Self {
            larmor_freq: T::lit(2.8e9),
            dipolar: T::TAU() * T::lit(0.6e6),
            line_sigma: T::lit(15e6 / 2.355),
            rabi: T::lit(1.136e6),
        }
    }
}

impl<T: Real> TargetSpin<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("larmor_freq", self.larmor_freq),
            ("dipolar", self.dipolar),
            ("line_sigma", self.line_sigma),
            ("rabi", self.rabi),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    C13,
    Electron,
}

impl Species {
    pub fn gamma_hz_per_gauss(self) -> f64 {
        match self {
            Species::C13 => GAMMA_C13_HZ_PER_G,
            Species::Electron => GAMMA_E_HZ_PER_G,
        }
    }
}

impl FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c13" | "13c" => Ok(Species::C13),
            "electron" | "e" => Ok(Species::Electron),
            _ => Err(Error::UnknownSpecies(s.to_string())),
        }
    }
}

/// Larmor frequency in Hz for a field in Gauss.
pub fn larmor_frequency<T: Real>(field_gauss: T, species: Species) -> Result<T> {
    if !(field_gauss >= T::zero()) {
        return Err(Error::Invalid("field must be non-negative".into()));
    }
    Ok(field_gauss * T::lit(species.gamma_hz_per_gauss()))
}
