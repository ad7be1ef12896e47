//! Spectral and least-squares analysis of traces.

mod crb;
mod fits;
pub mod lm;

pub use crb::{
    coverage, crb_report, crb_report_values, fit_frequency_counts, identifiable_half_width, CrbReport,
    COMPETING_MODE_DEFICIT,
};
pub use fits::{fit_decaying_cosines, fit_stretched_exp, CosineFitOptions};

use crate::error::{Error, Result};
use crate::sim::Trace;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// A fitted parameter with its 1σ uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
    /// False when the data carry no information about the parameter.
    pub identifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    pub residual_norm: f64,
    /// False means the parameters are unreliable.
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.value)
    }
}

/// Abscissa and one channel's means from a trace.
pub fn trace_xy<'a>(trace: &'a Trace, channel: &str) -> Result<(&'a [f64], &'a [f64])> {
    let c = trace
        .channel(channel)
        .ok_or_else(|| Error::Invalid(format!("trace has no channel '{channel}'")))?;
    Ok((&trace.x, &c.mean))
}

/// Uniform sample spacing of `x`, rejecting deviations above 10⁻⁶ relative.
pub fn uniform_spacing(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::EmptyGrid("need at least two samples"));
    }
    let dx = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if !(dx > 0.0) {
        return Err(Error::Invalid("abscissa must be increasing".into()));
    }
    let dev = x
        .windows(2)
        .map(|w| ((w[1] - w[0]) - dx).abs() / dx)
        .fold(0.0, f64::max);
    if dev > 1e-6 {
        return Err(Error::NonUniform(dev));
    }
    Ok(dx)
}

/// One-sided power spectrum of a mean-subtracted signal.
///
/// Interior bins are doubled so that `Σ power = N · variance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    /// Frequencies in Hz (abscissa in seconds).
    pub freq: Vec<f64>,
    pub power: Vec<f64>,
}

/// A spectral peak, with its frequency refined by parabolic interpolation
/// of the three bins around the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    pub freq: f64,
    pub power: f64,
}

impl Periodogram {
    /// Local maxima excluding DC, strongest first.
    pub fn peaks(&self) -> Vec<Peak> {
        let p = &self.power;
        let df = if self.freq.len() > 1 { self.freq[1] - self.freq[0] } else { 0.0 };
        let mut out: Vec<Peak> = (1..p.len())
            .filter(|&k| {
                let right = if k + 1 < p.len() { p[k + 1] } else { f64::NEG_INFINITY };
                p[k] > p[k - 1] && p[k] >= right && p[k] > 0.0
            })
            .map(|k| {
                let mut shift = 0.0;
                if k + 1 < p.len() {
                    let (a, b, c) = (p[k - 1], p[k], p[k + 1]);
                    let denom = a - 2.0 * b + c;
                    if denom != 0.0 {
                        shift = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
                    }
                }
                Peak {
                    bin: k,
                    freq: self.freq[k] + shift * df,
                    power: p[k],
                }
            })
            .collect();
        out.sort_by(|a, b| b.power.total_cmp(&a.power));
        out
    }

    /// The strongest peak within `[lo, hi]` Hz.
    pub fn strongest_in(&self, lo: f64, hi: f64) -> Option<Peak> {
        self.peaks().into_iter().find(|p| p.freq >= lo && p.freq <= hi)
    }
}

pub fn periodogram(x: &[f64], y: &[f64]) -> Result<Periodogram> {
    if x.len() != y.len() {
        return Err(Error::Invalid("x and y lengths differ".into()));
    }
    let dx = uniform_spacing(x)?;
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mut freq = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, z) in buf.iter().enumerate().take(half + 1) {
        let mut p = z.norm_sqr() / n as f64;
        let nyquist = n % 2 == 0 && k == half;
        if k != 0 && !nyquist {
            p *= 2.0;
        }
        freq.push(k as f64 / (n as f64 * dx));
        power.push(p);
    }
    Ok(Periodogram { freq, power })
}

pub fn periodogram_trace(trace: &Trace, channel: &str) -> Result<Periodogram> {
    let (x, y) = trace_xy(trace, channel)?;
    periodogram(x, y)
}
