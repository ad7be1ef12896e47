//! INI-style configuration with unit-suffixed keys.
//!
//! A file holds `[section]` headers followed by `key = value` lines; a key
//! may also be written in dotted form (`sensor.T2star_us = 0.5`) anywhere.
//! `#` and `;` start comments. Lists are comma-separated. Every key carries
//! its unit in its name, values are stored exactly as written (in file
//! units) and converted to SI only by the accessor methods, so loading,
//! serializing and loading again reproduces the same [`Config`].
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `sensor.T1_us` | 1000 | relaxation time |
//! | `sensor.T2star_us` | 0.38 | Ramsey dephasing time |
//! | `sensor.T2_us` | 4.3 | Hahn-echo coherence time |
//! | `sensor.T2p_us` | 5.1 | correlation-sequence coherence time |
//! | `sensor.contrast` | 1 | readout contrast in (0, 1] |
//! | `sensor.overhead_us` | 3 | dead time per measurement |
//! | `sensor.gamma_nv_mhz_per_g` | 2.8025 | NV gyromagnetic ratio / 2π |
//! | `sequence.tau_us` | 6 | total sensing time |
//! | `sequence.tcorr_us` | 20 | correlation time |
//! | `sequence.n_reps` | 100 | repetitions per point |
//! | `tone.amplitude_rad_us` | (empty) | tone amplitudes, one per tone |
//! | `tone.freq_khz` | (empty) | tone frequencies |
//! | `tone.phase_rad` | (empty) | fixed phases or `random`; empty means all random |
//! | `tone.detuning_khz` | 0 | static detuning |
//! | `tone.hyperfine_khz` | 0 | static hyperfine shift |
//! | `tone.dipolar_khz` | 0 | static dipolar shift |
//! | `noise.alpha_corr_us2` | inf | inverse variance of the slow correlated rate |
//! | `noise.alpha_fast_us2` | inf | inverse variance of the fast per-window rate |
//! | `chirp.tp_us` | 1.6 | chirp duration |
//! | `chirp.span_mhz` | 2.5 | chirp sweep span |
//! | `chirp.center_mhz` | 0 | sweep center offset from the drive |
//! | `chirp.pi_us` | 0.44 | rectangular π-pulse length |
//! | `chirp.rabi_mhz` | 1.136 | Rabi frequency |
//! | `chirp.line_sigma_mhz` | 6.3694 | target line standard deviation |
//! | `chirp.larmor_mhz` | 2800 | target Larmor frequency |
//! | `chirp.dipolar_mhz` | 0.6 | sensor-target dipolar coupling |
//! | `chirp.q_values` | 1, 2, 5, 10, 20 | adiabaticity values for contrast scans |
//! | `chirp.scan_start_mhz` | 2780 | first drive frequency of a DEER scan |
//! | `chirp.scan_stop_mhz` | 2820 | last drive frequency of a DEER scan |
//! | `chirp.scan_points` | 81 | drive frequencies in a DEER scan |
//! | `sweep.axis` | t_corr | swept parameter, `tau` or `t_corr` |
//! | `sweep.start_us` | 10 | first sweep value |
//! | `sweep.stop_us` | 200 | last sweep value |
//! | `sweep.points` | 64 | sweep points |
//! | `run.seed` | 0 | master seed |
//! | `run.shots` | 100 | shots per block and repetition |
//! | `run.intrinsic_decay` | false | apply the sensor's exponential decay |
//! | `run.protocol` | resolute | `resolute`, `ramsey`, `hahn` or `deer` |
//! | `run.p_flip` | 0 | target inversion probability for `deer` |
//! | `run.amplitude_rad_us` | 1 | tone amplitude for information calculations |
//! | `run.n_sequences` | 500 | sequences per experiment |
//! | `run.grid_start_khz` | 2 | first frequency of comparison grids |
//! | `run.grid_stop_khz` | 150 | last frequency of comparison grids |
//! | `run.grid_points` | 75 | points of comparison grids |
//! | `run.phi_nodes` | 64 | phase nodes for phase averages |
//! | `run.rayleigh` | inverse | `inverse` (Δω² ≤ 4/ω²) or `relative` (Δω ≤ ω/2) |

use crate::chirp::ChirpParams;
use crate::error::{Error, Result};
use crate::fisher::{ComparisonParams, RayleighCriterion};
use crate::model::{DcTerms, NoiseParams, SensorParams, SequenceParams, TargetSpin, ToneSignal};
use crate::phase::Protocol;
use crate::sim::{SimConfig, Sweep, SweepAxis};
use crate::units::{khz_to_rad, us2_to_s2, us_to_s, MHZ};
use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// What `simulate` produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimKind {
    Resolute,
    Ramsey,
    Hahn,
    Deer,
}

impl SimKind {
    /// The protocol simulated, with DEER running the correlation sequence.
    pub fn protocol(self) -> Protocol {
        match self {
            SimKind::Resolute | SimKind::Deer => Protocol::Resolute,
            SimKind::Ramsey => Protocol::Ramsey,
            SimKind::Hahn => Protocol::HahnEcho,
        }
    }
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimKind::Resolute => "resolute",
            SimKind::Ramsey => "ramsey",
            SimKind::Hahn => "hahn",
            SimKind::Deer => "deer",
        })
    }
}

impl FromStr for SimKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resolute" => Ok(SimKind::Resolute),
            "ramsey" => Ok(SimKind::Ramsey),
            "hahn" => Ok(SimKind::Hahn),
            "deer" => Ok(SimKind::Deer),
            _ => Err(Error::Parse(format!(
                "unknown protocol '{s}' (expected resolute, ramsey, hahn or deer)"
            ))),
        }
    }
}

/// Which frequency-resolution threshold marks a point feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayleighKind {
    Inverse,
    Relative,
}

impl RayleighKind {
    pub fn criterion(self) -> RayleighCriterion {
        match self {
            RayleighKind::Inverse => RayleighCriterion::default(),
            RayleighKind::Relative => RayleighCriterion::relative(),
        }
    }
}

impl fmt::Display for RayleighKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RayleighKind::Inverse => "inverse",
            RayleighKind::Relative => "relative",
        })
    }
}

impl FromStr for RayleighKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(RayleighKind::Inverse),
            "relative" => Ok(RayleighKind::Relative),
            _ => Err(Error::Parse(format!("unknown criterion '{s}' (expected inverse or relative)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSection {
    pub t1_us: f64,
    pub t2star_us: f64,
    pub t2_us: f64,
    pub t2p_us: f64,
    pub contrast: f64,
    pub overhead_us: f64,
    pub gamma_nv_mhz_per_g: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            t1_us: 1000.0,
            t2star_us: 0.38,
            t2_us: 4.3,
            t2p_us: 5.1,
            contrast: 1.0,
            overhead_us: 3.0,
            gamma_nv_mhz_per_g: 2.8025,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSection {
    pub tau_us: f64,
    pub tcorr_us: f64,
    pub n_reps: usize,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            tau_us: 6.0,
            tcorr_us: 20.0,
            n_reps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToneSection {
    pub amplitude_rad_us: Vec<f64>,
    pub freq_khz: Vec<f64>,
    /// `None` entries draw a fresh phase per repetition.
    pub phase_rad: Vec<Option<f64>>,
    pub detuning_khz: f64,
    pub hyperfine_khz: f64,
    pub dipolar_khz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSection {
    pub alpha_corr_us2: f64,
    pub alpha_fast_us2: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            alpha_corr_us2: f64::INFINITY,
            alpha_fast_us2: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChirpSection {
    pub tp_us: f64,
    pub span_mhz: f64,
    pub center_mhz: f64,
    pub pi_us: f64,
    pub rabi_mhz: f64,
    pub line_sigma_mhz: f64,
    pub larmor_mhz: f64,
    pub dipolar_mhz: f64,
    pub q_values: Vec<f64>,
    pub scan_start_mhz: f64,
    pub scan_stop_mhz: f64,
    pub scan_points: usize,
}

impl Default for ChirpSection {
    fn default() -> Self {
        Self {
            tp_us: 1.6,
            span_mhz: 2.5,
            center_mhz: 0.0,
            pi_us: 0.44,
            rabi_mhz: 1.136,
            line_sigma_mhz: 15.0 / 2.355,
            larmor_mhz: 2800.0,
            dipolar_mhz: 0.6,
            q_values: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            scan_start_mhz: 2780.0,
            scan_stop_mhz: 2820.0,
            scan_points: 81,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub start_us: f64,
    pub stop_us: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Tcorr,
            start_us: 10.0,
            stop_us: 200.0,
            points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub shots: u64,
    pub intrinsic_decay: bool,
    pub protocol: SimKind,
    pub p_flip: f64,
    pub amplitude_rad_us: f64,
    pub n_sequences: usize,
    pub grid_start_khz: f64,
    pub grid_stop_khz: f64,
    pub grid_points: usize,
    pub phi_nodes: usize,
    pub rayleigh: RayleighKind,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            shots: 100,
            intrinsic_decay: false,
            protocol: SimKind::Resolute,
            p_flip: 0.0,
            amplitude_rad_us: 1.0,
            n_sequences: 500,
            grid_start_khz: 2.0,
            grid_stop_khz: 150.0,
            grid_points: 75,
            phi_nodes: crate::fisher::PHI_NODES,
            rayleigh: RayleighKind::Inverse,
        }
    }
}

/// The complete effective configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub sensor: SensorSection,
    pub sequence: SequenceSection,
    pub tone: ToneSection,
    pub noise: NoiseSection,
    pub chirp: ChirpSection,
    pub sweep: SweepSection,
    pub run: RunSection,
}

type ParseResult<T> = std::result::Result<T, String>;

fn number(v: &str) -> ParseResult<f64> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, found '{v}'"))?;
    if x.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(x)
}

fn finite(v: &str) -> ParseResult<f64> {
    let x = number(v)?;
    if !x.is_finite() {
        return Err("must be finite".into());
    }
    Ok(x)
}

fn positive(v: &str) -> ParseResult<f64> {
    let x = finite(v)?;
    if !(x > 0.0) {
        return Err(format!("must be positive, found {x}"));
    }
    Ok(x)
}

fn non_negative(v: &str) -> ParseResult<f64> {
    let x = finite(v)?;
    if !(x >= 0.0) {
        return Err(format!("must be non-negative, found {x}"));
    }
    Ok(x)
}

fn positive_or_inf(v: &str) -> ParseResult<f64> {
    let x = number(v)?;
    if !(x > 0.0) {
        return Err(format!("must be positive (or inf), found {x}"));
    }
    Ok(x)
}

fn contrast(v: &str) -> ParseResult<f64> {
    let x = finite(v)?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(format!("must lie in (0, 1], found {x}"));
    }
    Ok(x)
}

fn probability(v: &str) -> ParseResult<f64> {
    let x = finite(v)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("must lie in [0, 1], found {x}"));
    }
    Ok(x)
}

fn count(v: &str) -> ParseResult<usize> {
    let n: usize = v.parse().map_err(|_| format!("expected a non-negative integer, found '{v}'"))?;
    if n == 0 {
        return Err("must be at least 1".into());
    }
    Ok(n)
}

fn count_u64(v: &str) -> ParseResult<u64> {
    let n: u64 = v.parse().map_err(|_| format!("expected a non-negative integer, found '{v}'"))?;
    if n == 0 {
        return Err("must be at least 1".into());
    }
    Ok(n)
}

fn seed(v: &str) -> ParseResult<u64> {
    v.parse().map_err(|_| format!("expected a non-negative integer, found '{v}'"))
}

fn boolean(v: &str) -> ParseResult<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found '{v}'")),
    }
}

fn items(v: &str) -> Vec<&str> {
    if v.trim().is_empty() {
        Vec::new()
    } else {
        v.split(',').map(str::trim).collect()
    }
}

fn list_non_negative(v: &str) -> ParseResult<Vec<f64>> {
    items(v).into_iter().map(non_negative).collect()
}

fn list_positive(v: &str) -> ParseResult<Vec<f64>> {
    items(v).into_iter().map(positive).collect()
}

fn list_phase(v: &str) -> ParseResult<Vec<Option<f64>>> {
    items(v)
        .into_iter()
        .map(|s| {
            if s == "random" {
                return Ok(None);
            }
            let x = finite(s)?;
            if !(0.0..TAU).contains(&x) {
                return Err(format!("phase must lie in [0, 2π), found {x}"));
            }
            Ok(Some(x))
        })
        .collect()
}

fn parsed<T: FromStr<Err = Error>>(v: &str) -> ParseResult<T> {
    v.parse().map_err(|e: Error| e.to_string())
}

fn show<T: fmt::Display>(v: &T) -> String {
    v.to_string()
}

fn show_list(v: &Vec<f64>) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn show_phases(v: &Vec<Option<f64>>) -> String {
    v.iter()
        .map(|p| p.map_or_else(|| "random".to_string(), |x| x.to_string()))
        .collect::<Vec<_>>()
        .join(", ")
}

struct Key {
    section: &'static str,
    name: &'static str,
    get: fn(&Config) -> String,
    set: fn(&mut Config, &str) -> ParseResult<()>,
}

macro_rules! key {
    ($sec:ident . $field:ident, $name:literal, $parse:expr, $show:expr) => {
        Key {
            section: stringify!($sec),
            name: $name,
            get: |c: &Config| ($show)(&c.$sec.$field),
            set: |c: &mut Config, v: &str| {
                c.$sec.$field = ($parse)(v)?;
                Ok(())
            },
        }
    };
}

/// Section names in file order.
pub const SECTIONS: [&str; 7] = ["sensor", "sequence", "tone", "noise", "chirp", "sweep", "run"];

fn keys() -> Vec<Key> {
    vec![
        key!(sensor.t1_us, "T1_us", positive, show),
        key!(sensor.t2star_us, "T2star_us", positive, show),
        key!(sensor.t2_us, "T2_us", positive, show),
        key!(sensor.t2p_us, "T2p_us", positive, show),
        key!(sensor.contrast, "contrast", contrast, show),
        key!(sensor.overhead_us, "overhead_us", non_negative, show),
        key!(sensor.gamma_nv_mhz_per_g, "gamma_nv_mhz_per_g", positive, show),
        key!(sequence.tau_us, "tau_us", positive, show),
        key!(sequence.tcorr_us, "tcorr_us", positive, show),
        key!(sequence.n_reps, "n_reps", count, show),
        key!(tone.amplitude_rad_us, "amplitude_rad_us", list_non_negative, show_list),
        key!(tone.freq_khz, "freq_khz", list_non_negative, show_list),
        key!(tone.phase_rad, "phase_rad", list_phase, show_phases),
        key!(tone.detuning_khz, "detuning_khz", finite, show),
        key!(tone.hyperfine_khz, "hyperfine_khz", finite, show),
        key!(tone.dipolar_khz, "dipolar_khz", non_negative, show),
        key!(noise.alpha_corr_us2, "alpha_corr_us2", positive_or_inf, show),
        key!(noise.alpha_fast_us2, "alpha_fast_us2", positive_or_inf, show),
        key!(chirp.tp_us, "tp_us", positive, show),
        key!(chirp.span_mhz, "span_mhz", positive, show),
        key!(chirp.center_mhz, "center_mhz", finite, show),
        key!(chirp.pi_us, "pi_us", positive, show),
        key!(chirp.rabi_mhz, "rabi_mhz", positive, show),
        key!(chirp.line_sigma_mhz, "line_sigma_mhz", non_negative, show),
        key!(chirp.larmor_mhz, "larmor_mhz", non_negative, show),
        key!(chirp.dipolar_mhz, "dipolar_mhz", non_negative, show),
        key!(chirp.q_values, "q_values", list_positive, show_list),
        key!(chirp.scan_start_mhz, "scan_start_mhz", non_negative, show),
        key!(chirp.scan_stop_mhz, "scan_stop_mhz", non_negative, show),
        key!(chirp.scan_points, "scan_points", count, show),
        key!(sweep.axis, "axis", parsed::<SweepAxis>, show),
        key!(sweep.start_us, "start_us", positive, show),
        key!(sweep.stop_us, "stop_us", positive, show),
        key!(sweep.points, "points", count, show),
        key!(run.seed, "seed", seed, show),
        key!(run.shots, "shots", count_u64, show),
        key!(run.intrinsic_decay, "intrinsic_decay", boolean, show),
        key!(run.protocol, "protocol", parsed::<SimKind>, show),
        key!(run.p_flip, "p_flip", probability, show),
        key!(run.amplitude_rad_us, "amplitude_rad_us", non_negative, show),
        key!(run.n_sequences, "n_sequences", count, show),
        key!(run.grid_start_khz, "grid_start_khz", positive, show),
        key!(run.grid_stop_khz, "grid_stop_khz", positive, show),
        key!(run.grid_points, "grid_points", count, show),
        key!(run.phi_nodes, "phi_nodes", count, show),
        key!(run.rayleigh, "rayleigh", parsed::<RayleighKind>, show),
    ]
}

/// Part of a key name before its unit suffix.
fn stem(name: &str) -> &str {
    name.rsplit_once('_').map_or(name, |(s, _)| s)
}

fn column(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

fn config_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        column,
        message: message.into(),
    }
}

impl Config {
    /// Parses configuration text, applying defaults for absent keys.
    pub fn parse(text: &str) -> Result<Self> {
        let table = keys();
        let mut cfg = Config::default();
        let mut seen = HashSet::new();
        let mut section: Option<&'static str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = raw.find(['#', ';']).map_or(raw, |c| &raw[..c]);
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let lead = content.len() - content.trim_start().len();
            if trimmed.starts_with('[') {
                if !trimmed.ends_with(']') {
                    return Err(config_error(line_no, column(raw, lead), "unterminated section header"));
                }
                let name = trimmed[1..trimmed.len() - 1].trim();
                section = Some(SECTIONS.iter().copied().find(|s| *s == name).ok_or_else(|| {
                    config_error(
                        line_no,
                        column(raw, lead),
                        format!("unknown section '{name}' (expected one of {})", SECTIONS.join(", ")),
                    )
                })?);
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(config_error(line_no, column(raw, lead), "expected 'key = value'"));
            };
            let key = content[..eq].trim();
            let key_col = column(raw, lead);
            let after = &content[eq + 1..];
            let value = after.trim();
            let value_col = column(raw, eq + 1 + (after.len() - after.trim_start().len()));
            let (sec, name) = match key.split_once('.') {
                Some((s, n)) => (s, n),
                None => match section {
                    Some(s) => (s, key),
                    None => {
                        return Err(config_error(
                            line_no,
                            key_col,
                            format!("key '{key}' appears before any section header"),
                        ))
                    }
                },
            };
            if !SECTIONS.contains(&sec) {
                return Err(config_error(line_no, key_col, format!("unknown section '{sec}'")));
            }
            let Some(k) = table.iter().find(|k| k.section == sec && k.name == name) else {
                let similar = table
                    .iter()
                    .find(|k| k.section == sec && stem(k.name) == stem(name) && k.name.contains('_'));
                let message = match similar {
                    Some(k) => format!("wrong unit suffix in '{sec}.{name}': expected '{sec}.{}'", k.name),
                    None => format!("unknown key '{sec}.{name}'"),
                };
                return Err(config_error(line_no, key_col, message));
            };
            if !seen.insert((sec, k.name)) {
                return Err(config_error(line_no, key_col, format!("duplicate key '{sec}.{name}'")));
            }
            (k.set)(&mut cfg, value)
                .map_err(|m| config_error(line_no, value_col, format!("{sec}.{name}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The full effective configuration as text accepted by [`Config::parse`].
    pub fn to_ini(&self) -> String {
        let table = keys();
        let mut out = String::new();
        for (i, sec) in SECTIONS.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("[{sec}]\n"));
            for k in table.iter().filter(|k| k.section == *sec) {
                let v = (k.get)(self);
                if v.is_empty() {
                    out.push_str(&format!("{} =\n", k.name));
                } else {
                    out.push_str(&format!("{} = {v}\n", k.name));
                }
            }
        }
        out
    }

    /// Cross-key invariants, checked after every key is parsed.
    pub fn validate(&self) -> Result<()> {
        let t = &self.tone;
        if t.amplitude_rad_us.len() != t.freq_khz.len() {
            return Err(Error::Invalid(format!(
                "tone.amplitude_rad_us has {} entries but tone.freq_khz has {}",
                t.amplitude_rad_us.len(),
                t.freq_khz.len()
            )));
        }
        if !t.phase_rad.is_empty() && t.phase_rad.len() != t.freq_khz.len() {
            return Err(Error::Invalid(format!(
                "tone.phase_rad has {} entries but there are {} tones",
                t.phase_rad.len(),
                t.freq_khz.len()
            )));
        }
        if self.sweep.stop_us < self.sweep.start_us {
            return Err(Error::Invalid("sweep.stop_us is below sweep.start_us".into()));
        }
        if self.run.grid_stop_khz < self.run.grid_start_khz {
            return Err(Error::Invalid("run.grid_stop_khz is below run.grid_start_khz".into()));
        }
        if self.chirp.scan_stop_mhz < self.chirp.scan_start_mhz {
            return Err(Error::Invalid("chirp.scan_stop_mhz is below chirp.scan_start_mhz".into()));
        }
        self.sim_config().validate()?;
        self.target_spin().validate()?;
        self.chirp_params().validate()
    }

    pub fn sensor_params(&self) -> SensorParams<f64> {
        let s = &self.sensor;
        SensorParams {
            t1: us_to_s(s.t1_us),
            t2_star: us_to_s(s.t2star_us),
            t2_hahn: us_to_s(s.t2_us),
            t2_p: us_to_s(s.t2p_us),
            contrast: s.contrast,
            overhead: us_to_s(s.overhead_us),
            gamma_nv: TAU * s.gamma_nv_mhz_per_g * MHZ,
        }
    }

    pub fn sequence_params(&self) -> SequenceParams<f64> {
        let s = &self.sequence;
        SequenceParams::new(us_to_s(s.tau_us), us_to_s(s.tcorr_us), s.n_reps)
    }

    pub fn tones(&self) -> Vec<ToneSignal<f64>> {
        let t = &self.tone;
        t.amplitude_rad_us
            .iter()
            .zip(&t.freq_khz)
            .enumerate()
            .map(|(i, (&a, &f))| ToneSignal::new(a / us_to_s(1.0), khz_to_rad(f), t.phase_rad.get(i).copied().flatten()))
            .collect()
    }

    pub fn dc_terms(&self) -> DcTerms<f64> {
        DcTerms {
            detuning: khz_to_rad(self.tone.detuning_khz),
            hyperfine: khz_to_rad(self.tone.hyperfine_khz),
            dipolar: khz_to_rad(self.tone.dipolar_khz),
        }
    }

    pub fn noise_params(&self) -> NoiseParams<f64> {
        NoiseParams {
            alpha_corr: us2_to_s2(self.noise.alpha_corr_us2),
            alpha_fast: us2_to_s2(self.noise.alpha_fast_us2),
            seed: self.run.seed,
        }
    }

    pub fn sweep(&self) -> Sweep {
        let s = &self.sweep;
        Sweep::new(s.axis, us_to_s(s.start_us), us_to_s(s.stop_us), s.points)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            sensor: self.sensor_params(),
            seq: self.sequence_params(),
            tones: self.tones(),
            dc: self.dc_terms(),
            noise: self.noise_params(),
            sweep: self.sweep(),
            shots_per_block: self.run.shots,
            intrinsic_decay: self.run.intrinsic_decay,
        }
    }

    pub fn target_spin(&self) -> TargetSpin<f64> {
        let c = &self.chirp;
        TargetSpin {
            larmor_freq: c.larmor_mhz * MHZ,
            dipolar: TAU * c.dipolar_mhz * MHZ,
            line_sigma: c.line_sigma_mhz * MHZ,
            rabi: c.rabi_mhz * MHZ,
        }
    }

    pub fn chirp_params(&self) -> ChirpParams<f64> {
        let c = &self.chirp;
        ChirpParams {
            t_p: us_to_s(c.tp_us),
            span: c.span_mhz * MHZ,
            center_detuning: c.center_mhz * MHZ,
        }
    }

    /// Drive frequencies (Hz) of a DEER frequency scan.
    pub fn scan_frequencies(&self) -> Vec<f64> {
        let c = &self.chirp;
        linspace(c.scan_start_mhz * MHZ, c.scan_stop_mhz * MHZ, c.scan_points)
    }

    /// Angular frequencies of the comparison grid.
    pub fn omega_grid(&self) -> Vec<f64> {
        let r = &self.run;
        linspace(r.grid_start_khz, r.grid_stop_khz, r.grid_points)
            .into_iter()
            .map(khz_to_rad)
            .collect()
    }

    /// Tone amplitude for information calculations, in rad/s.
    pub fn amplitude(&self) -> f64 {
        self.run.amplitude_rad_us / us_to_s(1.0)
    }

    pub fn comparison_params(&self) -> ComparisonParams {
        ComparisonParams {
            sensor: self.sensor_params(),
            amplitude: self.amplitude(),
            tau_resolute: us_to_s(self.sequence.tau_us),
            n_sequences: self.run.n_sequences,
            phi_nodes: self.run.phi_nodes,
            rayleigh: self.run.rayleigh.criterion(),
        }
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config_err(text: &str) -> (usize, usize, String) {
        match Config::parse(text) {
            Err(Error::Config { line, column, message }) => (line, column, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert_eq!(Config::parse("# nothing\n\n[sensor]\n").unwrap(), Config::default());
    }

    #[test]
    fn defaults_match_the_library() {
        let c = Config::default();
        let s = c.sensor_params();
        let d = SensorParams::<f64>::default();
        for (a, b) in [(s.t1, d.t1), (s.t2_star, d.t2_star), (s.t2_hahn, d.t2_hahn), (s.t2_p, d.t2_p)] {
            assert!((a - b).abs() <= 1e-15 * b);
        }
        assert!((s.gamma_nv - d.gamma_nv).abs() <= 1e-9 * d.gamma_nv);
        assert_eq!(c.noise_params().alpha_fast, f64::INFINITY);
    }

    #[test]
    fn sections_and_dotted_keys() {
        let c = Config::parse("sensor.T2star_us = 0.5\n[sequence]\ntau_us = 5 # inline\nrun.seed = 7\n").unwrap();
        assert_eq!(c.sensor.t2star_us, 0.5);
        assert_eq!(c.sequence.tau_us, 5.0);
        assert_eq!(c.run.seed, 7);
    }

    #[test]
    fn negative_time_names_the_invariant() {
        let (line, column, message) = config_err("[sensor]\nT2star_us = -1\n");
        assert_eq!((line, column), (2, 13));
        assert!(message.contains("T2star_us") && message.contains("positive"), "{message}");
    }

    #[test]
    fn unknown_key_has_position() {
        let (line, column, message) = config_err("[sequence]\n  bogus = 3\n");
        assert_eq!((line, column), (2, 3));
        assert!(message.contains("unknown key"), "{message}");
    }

    #[test]
    fn wrong_unit_suffix_is_reported() {
        let (_, _, message) = config_err("[sequence]\ntau_ns = 5\n");
        assert!(message.contains("unit suffix") && message.contains("tau_us"), "{message}");
    }

    #[test]
    fn type_mismatch_is_reported() {
        let (line, column, message) = config_err("\n[run]\nintrinsic_decay = yes\n");
        assert_eq!((line, column), (3, 19));
        assert!(message.contains("true or false"), "{message}");
    }

    #[test]
    fn duplicate_and_unknown_section() {
        assert!(config_err("[run]\nseed = 1\nseed = 2\n").2.contains("duplicate"));
        assert!(config_err("[nope]\n").2.contains("unknown section"));
        assert!(config_err("seed = 1\n").2.contains("before any section"));
    }

    #[test]
    fn cross_key_checks() {
        assert!(matches!(
            Config::parse("[tone]\namplitude_rad_us = 1\n"),
            Err(Error::Invalid(_))
        ));
        assert!(matches!(
            Config::parse("[sensor]\nT2star_us = 10\nT2_us = 5\n"),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn tones_convert_to_si() {
        let c = Config::parse("[tone]\namplitude_rad_us = 1, 0.5\nfreq_khz = 69, 100\nphase_rad = 0.5, random\n").unwrap();
        let t = c.tones();
        assert_eq!(t.len(), 2);
        assert!((t[0].amplitude - 1e6).abs() < 1e-6);
        assert!((t[0].omega - TAU * 69e3).abs() < 1e-6);
        assert_eq!(t[0].phi, Some(0.5));
        assert_eq!(t[1].phi, None);
    }

    #[test]
    fn round_trip_of_defaults() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_ini()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn round_trip(
            tau in 0.01_f64..100.0,
            tcorr in 0.01_f64..1000.0,
            seed in any::<u64>(),
            freqs in proptest::collection::vec(0.0_f64..1e4, 0..4),
            alpha in prop_oneof![Just(f64::INFINITY), 1e-3_f64..1e3],
            decay in any::<bool>(),
        ) {
            let mut c = Config::default();
            c.sequence.tau_us = tau;
            c.sequence.tcorr_us = tcorr;
            c.run.seed = seed;
            c.run.intrinsic_decay = decay;
            c.noise.alpha_fast_us2 = alpha;
            c.tone.amplitude_rad_us = freqs.iter().map(|f| f / 1e3 + 0.1).collect();
            c.tone.phase_rad = freqs.iter().enumerate().map(|(i, _)| if i % 2 == 0 { Some(0.25 * i as f64) } else { None }).collect();
            c.tone.freq_khz = freqs;
            let once = Config::parse(&c.to_ini()).unwrap();
            prop_assert_eq!(&once, &c);
            let twice = Config::parse(&once.to_ini()).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
