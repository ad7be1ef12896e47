//! Monte-Carlo synthesis of measurement traces with shot noise, Gaussian
//! field noise and DEER-style target flips.
//!
//! Every repetition of every sweep point draws from its own ChaCha stream
//! seeded by mixing `(seed, point, repetition)`, so traces are identical
//! under any thread scheduling.

use crate::block::{combine_channels, propagate_block, single_phase_p0, DecayFactors, Quadrature};
use crate::error::{Error, Result};
use crate::model::{
    BlockSpec, DcTerms, NoiseParams, ReadoutSign, SensorParams, SequenceParams, TargetSpin, ToneSignal,
};
use crate::phase::{resolute_window_phases, window_phase, Protocol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Tau,
    Tcorr,
}

impl SweepAxis {
    /// Column name of the axis in traces, in seconds.
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::Tau => "tau_s",
            SweepAxis::Tcorr => "t_corr_s",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Tau => "tau",
            SweepAxis::Tcorr => "t_corr",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tau" => Ok(SweepAxis::Tau),
            "t_corr" | "tcorr" => Ok(SweepAxis::Tcorr),
            _ => Err(Error::Parse(format!("unknown sweep axis '{s}'"))),
        }
    }
}

/// Linear sweep of one timing parameter. Values in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
}

impl Sweep {
    pub fn new(axis: SweepAxis, start: f64, stop: f64, n_points: usize) -> Self {
        Self {
            axis,
            start,
            stop,
            n_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0 && self.stop.is_finite()) || self.stop < self.start {
            return Err(Error::Invalid("sweep bounds must be positive and ordered".into()));
        }
        if self.n_points == 0 {
            return Err(Error::Invalid("sweep needs at least one point".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.start + step * i as f64).collect()
    }

    /// Sequence timing at one sweep value; the other parameter comes from `base`.
    pub fn apply(&self, base: &SequenceParams<f64>, value: f64) -> SequenceParams<f64> {
        match self.axis {
            SweepAxis::Tau => SequenceParams::new(value, base.t_corr, base.n_reps),
            SweepAxis::Tcorr => SequenceParams::new(base.tau, value, base.n_reps),
        }
    }
}

/// Everything needed to synthesize a trace. `seq.n_reps` is the number of
/// repetitions per sweep point; each repetition measures every block
/// `shots_per_block` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sensor: SensorParams<f64>,
    pub seq: SequenceParams<f64>,
    pub tones: Vec<ToneSignal<f64>>,
    pub dc: DcTerms<f64>,
    pub noise: NoiseParams<f64>,
    pub sweep: Sweep,
    pub shots_per_block: u64,
    /// Apply the sensor's exponential coherence loss during sensing
    /// (`T2p`, `T2`, `T2*` per protocol) on top of the sampled field noise.
    pub intrinsic_decay: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sensor: SensorParams::default(),
            seq: SequenceParams::new(6e-6, 20e-6, 100),
            tones: Vec::new(),
            dc: DcTerms::default(),
            noise: NoiseParams::noiseless(0),
            sweep: Sweep::new(SweepAxis::Tcorr, 10e-6, 200e-6, 64),
            shots_per_block: 100,
            intrinsic_decay: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.seq.validate()?;
        for tone in &self.tones {
            tone.validate()?;
        }
        self.dc.validate()?;
        self.noise.validate()?;
        self.sweep.validate()?;
        if self.shots_per_block == 0 {
            return Err(Error::Invalid("shots_per_block must be at least 1".into()));
        }
        if self.seq.n_reps == 0 {
            return Err(Error::Invalid("n_reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One named signal of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceChannel {
    pub name: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Signals against a swept abscissa, with self-describing metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub axis: String,
    pub x: Vec<f64>,
    pub channels: Vec<TraceChannel>,
    pub metadata: BTreeMap<String, String>,
}

impl Trace {
    pub fn new(axis: impl Into<String>, x: Vec<f64>) -> Self {
        Self {
            axis: axis.into(),
            x,
            channels: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&TraceChannel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn push_channel(&mut self, name: impl Into<String>, mean: Vec<f64>, stderr: Vec<f64>) -> Result<()> {
        if mean.len() != self.x.len() || stderr.len() != self.x.len() {
            return Err(Error::Invalid("channel length differs from the axis".into()));
        }
        self.channels.push(TraceChannel {
            name: name.into(),
            mean,
            stderr,
        });
        Ok(())
    }

    /// A single-channel trace from bare samples, with zero standard errors.
    pub fn from_samples(axis: impl Into<String>, x: Vec<f64>, name: &str, y: Vec<f64>) -> Result<Self> {
        let mut t = Self::new(axis, x);
        let zeros = vec![0.0; y.len()];
        t.push_channel(name, y, zeros)?;
        Ok(t)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for repetition `rep` of sweep point `point`.
pub fn substream(seed: u64, point: u64, rep: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed) ^ point) ^ rep.rotate_left(32));
    ChaCha8Rng::seed_from_u64(key)
}

/// Random contributions of one repetition.
struct RepDraw {
    tone_phases: Vec<f64>,
    corr: f64,
    fast: [f64; 2],
}

fn draw_rep(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> RepDraw {
    let tone_phases = cfg
        .tones
        .iter()
        .map(|t| t.phi.unwrap_or_else(|| rng.random_range(0.0..TAU)))
        .collect();
    let gauss = |var: f64, rng: &mut ChaCha8Rng| {
        if var > 0.0 {
            Normal::new(0.0, var.sqrt()).unwrap().sample(rng)
        } else {
            0.0
        }
    };
    let corr = gauss(cfg.noise.corr_variance(), rng);
    let fv = cfg.noise.fast_variance();
    let fast = [gauss(fv, rng), gauss(fv, rng)];
    RepDraw {
        tone_phases,
        corr,
        fast,
    }
}

/// Window phases `(φ₁, φ₂)` of the correlation sequence for one repetition,
/// before any target-spin contribution.
fn resolute_phases(cfg: &SimConfig, seq: &SequenceParams<f64>, d: &RepDraw) -> (f64, f64) {
    let half = seq.tau / 2.0;
    let dc = cfg.dc.total();
    let mut p1 = (dc + d.corr + d.fast[0]) * half;
    let mut p2 = (dc + d.corr + d.fast[1]) * half;
    for (tone, &phi) in cfg.tones.iter().zip(&d.tone_phases) {
        let (a, b) = resolute_window_phases(tone.amplitude, tone.omega, phi, seq);
        p1 += a;
        p2 += b;
    }
    (p1, p2)
}

fn single_phase(cfg: &SimConfig, protocol: Protocol, seq: &SequenceParams<f64>, d: &RepDraw) -> f64 {
    let tau = seq.tau;
    let dc = cfg.dc.total();
    match protocol {
        Protocol::Ramsey => {
            let mut p = (dc + d.corr + d.fast[0]) * tau;
            for (tone, &phi) in cfg.tones.iter().zip(&d.tone_phases) {
                p += window_phase(tone.amplitude, tone.omega, phi, 0.0, tau);
            }
            p
        }
        _ => {
            let half = tau / 2.0;
            let mut p = (d.fast[0] - d.fast[1]) * half;
            for (tone, &phi) in cfg.tones.iter().zip(&d.tone_phases) {
                p += window_phase(tone.amplitude, tone.omega, phi, 0.0, half)
                    - window_phase(tone.amplitude, tone.omega, phi, half, tau);
            }
            p
        }
    }
}

fn resolute_decay(cfg: &SimConfig, seq: &SequenceParams<f64>) -> DecayFactors<f64> {
    let d = DecayFactors::from_times(seq.tau, seq.t_corr, &cfg.sensor);
    if cfg.intrinsic_decay {
        d
    } else {
        DecayFactors::new(1.0, d.d_store)
    }
}

fn single_phase_decay(cfg: &SimConfig, protocol: Protocol, tau: f64) -> f64 {
    if !cfg.intrinsic_decay {
        return 1.0;
    }
    match protocol {
        Protocol::Ramsey => (-tau / cfg.sensor.t2_star).exp(),
        _ => (-tau / cfg.sensor.t2_hahn).exp(),
    }
}

fn sample_fraction(p: f64, shots: u64, rng: &mut ChaCha8Rng) -> f64 {
    let p = p.clamp(0.0, 1.0);
    Binomial::new(shots, p).unwrap().sample(rng) as f64 / shots as f64
}

/// Four-block ground-state probabilities of the correlation sequence in
/// [`BlockSpec::ALL`] order.
fn resolute_probabilities(phi1: f64, phi2: f64, decay: DecayFactors<f64>, contrast: f64) -> [f64; 4] {
    BlockSpec::ALL.map(|b| propagate_block(b, phi1, phi2, decay, contrast))
}

const SINGLE_PHASE_BLOCKS: [(Quadrature, ReadoutSign); 4] = [
    (Quadrature::Cos, ReadoutSign::Plus),
    (Quadrature::Cos, ReadoutSign::Minus),
    (Quadrature::Sin, ReadoutSign::Plus),
    (Quadrature::Sin, ReadoutSign::Minus),
];

/// Per-point accumulator of channel samples across repetitions.
struct Accum {
    sums: Vec<f64>,
    sq: Vec<f64>,
    shot_var: Vec<f64>,
}

impl Accum {
    fn new(n: usize) -> Self {
        Self {
            sums: vec![0.0; n],
            sq: vec![0.0; n],
            shot_var: vec![0.0; n],
        }
    }

    fn add(&mut self, values: &[f64], shot_var: &[f64]) {
        for k in 0..values.len() {
            self.sums[k] += values[k];
            self.sq[k] += values[k] * values[k];
            self.shot_var[k] += shot_var[k];
        }
    }

    /// Mean and standard error per channel. With several repetitions the
    /// error is the sample standard error; with one it is the binomial
    /// estimate from the block probabilities.
    fn finish(&self, reps: usize) -> Vec<(f64, f64)> {
        let n = reps as f64;
        (0..self.sums.len())
            .map(|k| {
                let mean = self.sums[k] / n;
                let se = if reps > 1 {
                    let var = ((self.sq[k] - n * mean * mean) / (n - 1.0)).max(0.0);
                    (var / n).sqrt()
                } else {
                    self.shot_var[k].sqrt()
                };
                (mean.clamp(-1.0, 1.0), se)
            })
            .collect()
    }
}

fn block_shot_var(p: &[f64; 4], shots: u64) -> [f64; 4] {
    p.map(|q| q.clamp(0.0, 1.0) * (1.0 - q.clamp(0.0, 1.0)) / shots as f64)
}

/// `(S⁺, S⁻, S_x)` from four sampled block fractions, with the matching
/// binomial variances.
fn resolute_channels(f: &[f64; 4], v: &[f64; 4]) -> ([f64; 3], [f64; 3]) {
    let (sp, sm) = combine_channels(f[0], f[1], f[2], f[3]);
    let sx = f[0] - f[1];
    let all = v.iter().sum::<f64>();
    ([sm, sp, sx], [all, all, v[0] + v[1]])
}

const RESOLUTE_CHANNELS: [&str; 3] = ["s_minus", "s_plus", "s_x"];
const SINGLE_PHASE_CHANNELS: [&str; 2] = ["signal", "signal_sin"];

/// Target-spin modification of a repetition: returns `(Δφ₁, Δφ₂)`.
type TargetHook<'a> = dyn Fn(&SequenceParams<f64>, &mut ChaCha8Rng) -> (f64, f64) + Sync + 'a;

fn run_sweep(cfg: &SimConfig, protocol: Protocol, hook: Option<&TargetHook<'_>>) -> Result<Trace> {
    cfg.validate()?;
    let xs = cfg.sweep.values();
    let names: &[&str] = match protocol {
        Protocol::Resolute => &RESOLUTE_CHANNELS,
        _ => &SINGLE_PHASE_CHANNELS,
    };
    let shots = cfg.shots_per_block;
    let points: Vec<Vec<(f64, f64)>> = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let seq = cfg.sweep.apply(&cfg.seq, x);
            let mut acc = Accum::new(names.len());
            for rep in 0..cfg.seq.n_reps {
                let mut rng = substream(cfg.noise.seed, i as u64, rep as u64);
                let draw = draw_rep(cfg, &mut rng);
                match protocol {
                    Protocol::Resolute => {
                        let (mut p1, mut p2) = resolute_phases(cfg, &seq, &draw);
                        if let Some(h) = hook {
                            let (a, b) = h(&seq, &mut rng);
                            p1 += a;
                            p2 += b;
                        }
                        let probs = resolute_probabilities(p1, p2, resolute_decay(cfg, &seq), cfg.sensor.contrast);
                        let f = probs.map(|p| sample_fraction(p, shots, &mut rng));
                        let (vals, vars) = resolute_channels(&f, &block_shot_var(&probs, shots));
                        acc.add(&vals, &vars);
                    }
                    _ => {
                        let phase = single_phase(cfg, protocol, &seq, &draw);
                        let d = single_phase_decay(cfg, protocol, seq.tau);
                        let probs = SINGLE_PHASE_BLOCKS
                            .map(|(q, s)| single_phase_p0(q, s, phase, d, cfg.sensor.contrast).0);
                        let f = probs.map(|p| sample_fraction(p, shots, &mut rng));
                        let v = block_shot_var(&probs, shots);
                        acc.add(&[f[0] - f[1], f[2] - f[3]], &[v[0] + v[1], v[2] + v[3]]);
                    }
                }
            }
            acc.finish(cfg.seq.n_reps)
        })
        .collect();

    let mut trace = Trace::new(cfg.sweep.axis.column(), xs);
    for (k, name) in names.iter().enumerate() {
        let mean = points.iter().map(|p| p[k].0).collect();
        let se = points.iter().map(|p| p[k].1).collect();
        trace.push_channel(*name, mean, se)?;
    }
    trace.metadata.insert("protocol".into(), protocol.to_string());
    trace.metadata.insert("seed".into(), cfg.noise.seed.to_string());
    trace.metadata.insert("config".into(), serde_json::to_string(cfg)?);
    Ok(trace)
}

/// Synthesizes a sweep for one protocol.
///
/// The correlation sequence yields channels `s_minus`, `s_plus` and `s_x`
/// (X-middle blocks only); Ramsey and Hahn echo yield the cosine and sine
/// quadrature signals `signal` and `signal_sin`. Means are clamped to
/// `[−1, 1]`.
pub fn simulate_trace(cfg: &SimConfig, protocol: Protocol) -> Result<Trace> {
    run_sweep(cfg, protocol, None)
}

/// Correlation-sequence sweep with a dipolar-coupled target spin that is
/// flipped during `T_corr` with probability `p_flip`.
///
/// The target starts up or down at random, adding `±ω_dd·τ/2` to both
/// windows; a flip reverses the sign in the second window, so the
/// difference channel picks up `cos(ω_dd τ)` with weight `p_flip`.
pub fn simulate_deer_resolute(cfg: &SimConfig, target: &TargetSpin<f64>, p_flip: f64) -> Result<Trace> {
    if !(0.0..=1.0).contains(&p_flip) {
        return Err(Error::Invalid(format!("flip probability {p_flip} outside [0, 1]")));
    }
    target.validate()?;
    let w = target.dipolar;
    let hook = move |seq: &SequenceParams<f64>, rng: &mut ChaCha8Rng| {
        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let flipped = rng.random::<f64>() < p_flip;
        let first = s * w * seq.tau / 2.0;
        (first, if flipped { -first } else { first })
    };
    let mut trace = run_sweep(cfg, Protocol::Resolute, Some(&hook))?;
    trace.metadata.insert("p_flip".into(), p_flip.to_string());
    trace.metadata.insert("dipolar_rad_s".into(), w.to_string());
    Ok(trace)
}

/// Outcome tallies of the four correlation-sequence blocks at the base
/// timing, in [`BlockSpec::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub ground: [u64; 4],
    pub trials: u64,
}

/// Measures each block `n_reps · shots_per_block` times at `cfg.seq`,
/// drawing noise and random tone phases per repetition. `replica` selects
/// an independent set of substreams.
pub fn simulate_block_counts(cfg: &SimConfig, replica: u64) -> Result<BlockCounts> {
    cfg.validate()?;
    let seq = cfg.seq;
    let decay = resolute_decay(cfg, &seq);
    let mut ground = [0u64; 4];
    for rep in 0..seq.n_reps {
        let mut rng = substream(cfg.noise.seed, replica, rep as u64);
        let draw = draw_rep(cfg, &mut rng);
        let (p1, p2) = resolute_phases(cfg, &seq, &draw);
        let probs = resolute_probabilities(p1, p2, decay, cfg.sensor.contrast);
        for (g, p) in ground.iter_mut().zip(probs) {
            *g += Binomial::new(cfg.shots_per_block, p.clamp(0.0, 1.0)).unwrap().sample(&mut rng);
        }
    }
    Ok(BlockCounts {
        ground,
        trials: seq.n_reps as u64 * cfg.shots_per_block,
    })
}

/// Noise-free expected trace of one channel (`s_minus` or `s_plus`) for
/// fixed-phase tones and static terms, used as a reference curve.
pub fn expected_resolute_channel(cfg: &SimConfig, minus: bool) -> Result<Vec<f64>> {
    cfg.validate()?;
    let draw = RepDraw {
        tone_phases: cfg
            .tones
            .iter()
            .map(|t| t.fixed_phase())
            .collect::<Result<Vec<_>>>()?,
        corr: 0.0,
        fast: [0.0; 2],
    };
    Ok(cfg
        .sweep
        .values()
        .into_iter()
        .map(|x| {
            let seq = cfg.sweep.apply(&cfg.seq, x);
            let (p1, p2) = resolute_phases(cfg, &seq, &draw);
            let p = resolute_probabilities(p1, p2, resolute_decay(cfg, &seq), cfg.sensor.contrast);
            let (sp, sm) = combine_channels(p[0], p[1], p[2], p[3]);
            if minus {
                sm
            } else {
                sp
            }
        })
        .collect())
}
