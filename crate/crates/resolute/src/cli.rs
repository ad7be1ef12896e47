//! Command-line interface.
//!
//! Every subcommand reads an optional configuration file, applies flag
//! overrides, and writes one CSV or JSON file whose metadata echoes the
//! full effective configuration. Output goes to `--out`, else to
//! `$RESOLUTE_OUT_DIR/<command>.<ext>` when that variable is set, else to
//! standard output. Exit codes: 0 success, 1 usage or configuration error,
//! 2 computation or output error.

use crate::chirp::{
    contrast_vs_q, deer_frequency_scan, dip_contrast, dip_full_width, ensemble_flip, landau_zener, lz_flip_probability,
    ChirpParams, PulseKind,
};
use crate::error::Error;
use crate::estimation::{
    crb_report, fit_decaying_cosines, fit_frequency_counts, fit_stretched_exp, periodogram, trace_xy,
    CosineFitOptions, FitResult,
};
use crate::filter::{filter_function, filter_map};
use crate::fisher::{
    compare_protocols, fisher_approx_phase_avg, fisher_exact_sequence_with_nodes,
    fisher_sequence_at_phase, optimize_sequence, OptimizeBounds,
};
use crate::io::{read_trace, report_json, Config, Format, SimKind, Table};
use crate::model::{SequenceParams, ToneSignal};
use crate::phase::{phase_closed, phase_integral, Channel, Protocol};
use crate::sim::{simulate_block_counts, simulate_deer_resolute, simulate_trace, SweepAxis, Trace};
use crate::units::{khz_to_rad, rad_to_khz, s_to_us, us_to_s, MHZ};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RESOLUTE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "resolute", version, about = "Phase-cycled Ramsey-correlation sensing toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration file (INI sections sensor, sequence, tone, noise, chirp, sweep, run)
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output file
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to the extension of --out
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Master seed, overriding run.seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Resolute,
    Ramsey,
    Hahn,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Resolute => Protocol::Resolute,
            ProtocolArg::Ramsey => Protocol::Ramsey,
            ProtocolArg::Hahn => Protocol::HahnEcho,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Diff,
    Sum,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Diff => Channel::Diff,
            ChannelArg::Sum => Channel::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimArg {
    Resolute,
    Ramsey,
    Hahn,
    Deer,
}

impl From<SimArg> for SimKind {
    fn from(s: SimArg) -> Self {
        match s {
            SimArg::Resolute => SimKind::Resolute,
            SimArg::Ramsey => SimKind::Ramsey,
            SimArg::Hahn => SimKind::Hahn,
            SimArg::Deer => SimKind::Deer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    Periodogram,
    Cosines,
    Stretched,
    Crb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PulseArg {
    Chirp,
    Pi,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase-averaged filter function over frequency, the sweep, or both
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Resolute)]
        protocol: ProtocolArg,
        #[arg(long, value_enum, default_value_t = ChannelArg::Diff)]
        channel: ChannelArg,
        /// Evaluate along the sweep at this tone frequency instead of over the frequency grid
        #[arg(long)]
        omega_khz: Option<f64>,
        /// Correlation-time by frequency map over the sweep and the frequency grid
        #[arg(long, conflicts_with = "omega_khz")]
        map: bool,
    },
    /// Closed-form accumulated phase of the configured tones along the sweep, with a quadrature check
    Phase {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Resolute)]
        protocol: ProtocolArg,
        #[arg(long, value_enum, default_value_t = ChannelArg::Diff)]
        channel: ChannelArg,
    },
    /// Monte-Carlo trace along the configured sweep
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        protocol: Option<SimArg>,
        /// Target inversion probability for the DEER protocol
        #[arg(long)]
        p_flip: Option<f64>,
    },
    /// Fisher information of one sequence and of an experiment
    Fisher {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        omega_khz: f64,
        #[arg(long)]
        tau_us: Option<f64>,
        #[arg(long)]
        tcorr_us: Option<f64>,
        #[arg(long)]
        amplitude_rad_us: Option<f64>,
        #[arg(long)]
        n_sequences: Option<usize>,
    },
    /// Information of the correlation sequence, Hahn echo and Ramsey at equal duration
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Search for the (tau, T_corr) pair maximizing the information
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        omega_khz: f64,
        #[arg(long, default_value_t = 0.5)]
        tau_min_us: f64,
        #[arg(long, default_value_t = 20.0)]
        tau_max_us: f64,
        #[arg(long, default_value_t = 1.0)]
        tcorr_min_us: f64,
        /// Defaults to sensor.T1_us
        #[arg(long)]
        tcorr_max_us: Option<f64>,
    },
    /// Chirped-pulse inversion of the target spin
    Chirp {
        #[command(subcommand)]
        mode: ChirpMode,
    },
    /// Spectral and least-squares analysis of a trace, or a Monte-Carlo CRB check
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = FitModel::Periodogram)]
        model: FitModel,
        /// Trace file written by `simulate` (not used by the crb model)
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "s_minus")]
        channel: String,
        #[arg(long, default_value_t = 2)]
        components: usize,
        /// Replicas for the crb model
        #[arg(long, default_value_t = 200)]
        replicas: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChirpMode {
    /// Adiabaticity of the configured chirp and its on-resonance inversion
    Q {
        #[command(flatten)]
        common: Common,
    },
    /// Simulated on-resonance inversion against the Landau-Zener formula
    Lz {
        #[command(flatten)]
        common: Common,
    },
    /// Line-averaged inversion by the configured chirp and by the pi pulse
    Ensemble {
        #[command(flatten)]
        common: Common,
    },
    /// Readout contrast against adiabaticity at fixed chirp duration
    Contrast {
        #[command(flatten)]
        common: Common,
    },
    /// DEER frequency scan over the configured drive frequencies
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = PulseArg::Chirp)]
        pulse: PulseArg,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Compute(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Compute(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

struct Context {
    config: Config,
    common: Common,
    name: &'static str,
}

impl Context {
    fn new(common: Common, name: &'static str) -> CliResult<Self> {
        let mut config = match &common.config {
            Some(p) => Config::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
            None => Config::default(),
        };
        if let Some(seed) = common.seed {
            config.run.seed = seed;
        }
        Ok(Self { config, common, name })
    }

    fn revalidate(&self) -> CliResult<()> {
        self.config.validate().map_err(|e| usage(e.to_string()))
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("command".into(), self.name.into());
        m.insert("seed".into(), self.config.run.seed.to_string());
        m.insert("config".into(), self.config.to_ini());
        m
    }

    fn format(&self, default: Format) -> Format {
        self.common
            .format
            .or_else(|| self.common.out.as_deref().map(Format::from_path))
            .unwrap_or(default)
    }

    fn destination(&self, format: Format) -> Option<PathBuf> {
        if let Some(p) = &self.common.out {
            return Some(p.clone());
        }
        std::env::var_os(OUT_DIR_ENV).map(|d| Path::new(&d).join(format!("{}.{format}", self.name)))
    }

    fn emit(&self, text: &str, format: Format) -> CliResult<()> {
        match self.destination(format) {
            Some(p) => crate::io::write_atomic(&p, text)?,
            None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)?,
        }
        Ok(())
    }

    fn emit_table(&self, mut table: Table) -> CliResult<()> {
        let format = self.format(Format::Csv);
        table.metadata.extend(self.metadata());
        self.emit(&table.render(format)?, format)
    }

    fn emit_trace(&self, trace: &Trace) -> CliResult<()> {
        self.emit_table(Table::from_trace(trace))
    }

    /// JSON reports keep their structure; CSV gets the one-row table.
    fn emit_report<R: Serialize>(&self, report: &R, mut table: Table) -> CliResult<()> {
        let format = self.format(Format::Json);
        table.metadata.extend(self.metadata());
        let text = match format {
            Format::Json => report_json(report, &table.metadata)?,
            Format::Csv => table.to_csv_string()?,
        };
        self.emit(&text, format)
    }
}

fn named(columns: Vec<(&str, Vec<f64>)>) -> crate::error::Result<Table> {
    Table::from_columns(columns.into_iter().map(|(n, v)| (n.to_string(), v)).collect())
}

fn one_row(pairs: &[(&str, f64)]) -> Table {
    named(pairs.iter().map(|(n, v)| (*n, vec![*v])).collect()).expect("single values")
}

fn axis_column(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Tau => "tau_us",
        SweepAxis::Tcorr => "t_corr_us",
    }
}

fn fit_table(fit: &FitResult) -> Table {
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    for p in &fit.params {
        cols.push((p.name.clone(), vec![p.value]));
        cols.push((format!("{}_sigma", p.name), vec![p.sigma]));
    }
    cols.push(("residual_norm".into(), vec![fit.residual_norm]));
    cols.push(("converged".into(), vec![if fit.converged { 1.0 } else { 0.0 }]));
    Table::from_columns(cols).expect("single values")
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Filter {
            common,
            protocol,
            channel,
            omega_khz,
            map,
        } => {
            let ctx = Context::new(common, "filter")?;
            cmd_filter(&ctx, protocol.into(), channel.into(), omega_khz, map)
        }
        Command::Phase {
            common,
            protocol,
            channel,
        } => {
            let ctx = Context::new(common, "phase")?;
            cmd_phase(&ctx, protocol.into(), channel.into())
        }
        Command::Simulate {
            common,
            protocol,
            p_flip,
        } => {
            let mut ctx = Context::new(common, "simulate")?;
            if let Some(p) = protocol {
                ctx.config.run.protocol = p.into();
            }
            if let Some(p) = p_flip {
                ctx.config.run.p_flip = p;
            }
            ctx.revalidate()?;
            cmd_simulate(&ctx)
        }
        Command::Fisher {
            common,
            omega_khz,
            tau_us,
            tcorr_us,
            amplitude_rad_us,
            n_sequences,
        } => {
            let mut ctx = Context::new(common, "fisher")?;
            let c = &mut ctx.config;
            c.sequence.tau_us = tau_us.unwrap_or(c.sequence.tau_us);
            c.sequence.tcorr_us = tcorr_us.unwrap_or(c.sequence.tcorr_us);
            c.run.amplitude_rad_us = amplitude_rad_us.unwrap_or(c.run.amplitude_rad_us);
            c.run.n_sequences = n_sequences.unwrap_or(c.run.n_sequences);
            ctx.revalidate()?;
            cmd_fisher(&ctx, omega_khz)
        }
        Command::Compare { common } => cmd_compare(&Context::new(common, "compare")?),
        Command::Optimize {
            common,
            omega_khz,
            tau_min_us,
            tau_max_us,
            tcorr_min_us,
            tcorr_max_us,
        } => {
            let ctx = Context::new(common, "optimize")?;
            let tc_max = tcorr_max_us.unwrap_or(ctx.config.sensor.t1_us);
            cmd_optimize(&ctx, omega_khz, (tau_min_us, tau_max_us), (tcorr_min_us, tc_max))
        }
        Command::Chirp { mode } => match mode {
            ChirpMode::Q { common } => cmd_chirp_q(&Context::new(common, "chirp-q")?),
            ChirpMode::Lz { common } => cmd_chirp_lz(&Context::new(common, "chirp-lz")?),
            ChirpMode::Ensemble { common } => cmd_chirp_ensemble(&Context::new(common, "chirp-ensemble")?),
            ChirpMode::Contrast { common } => cmd_chirp_contrast(&Context::new(common, "chirp-contrast")?),
            ChirpMode::Scan { common, pulse } => cmd_chirp_scan(&Context::new(common, "chirp-scan")?, pulse),
        },
        Command::Fit {
            common,
            model,
            input,
            channel,
            components,
            replicas,
        } => {
            let ctx = Context::new(common, "fit")?;
            cmd_fit(&ctx, model, input.as_deref(), &channel, components, replicas)
        }
    }
}

fn cmd_filter(ctx: &Context, protocol: Protocol, channel: Channel, omega_khz: Option<f64>, map: bool) -> CliResult<()> {
    let c = &ctx.config;
    let a = c.amplitude();
    let seq = c.sequence_params();
    let sweep = c.sweep();
    let mut table = if map {
        if sweep.axis != SweepAxis::Tcorr {
            return Err(usage("--map needs sweep.axis = t_corr"));
        }
        let m = filter_map(&sweep.values(), &c.omega_grid(), seq.tau, a, channel)?;
        let mut t = Table::new(vec!["t_corr_us".into(), "freq_khz".into(), "filter".into()]);
        for (i, &tc) in m.t_corr.iter().enumerate() {
            for (j, &w) in m.omega.iter().enumerate() {
                t.push_row(vec![s_to_us(tc), rad_to_khz(w), m.values[i * m.omega.len() + j]])?;
            }
        }
        t
    } else if let Some(f) = omega_khz {
        if !(f >= 0.0) {
            return Err(usage("--omega-khz must be non-negative"));
        }
        let w = khz_to_rad(f);
        let xs = sweep.values();
        let values = xs
            .iter()
            .map(|&x| filter_function(protocol, channel, &sweep.apply(&seq, x), a, w))
            .collect();
        named(vec![
            (axis_column(sweep.axis), xs.iter().map(|&x| s_to_us(x)).collect()),
            ("filter", values),
        ])?
    } else {
        let grid = c.omega_grid();
        let values = grid.iter().map(|&w| filter_function(protocol, channel, &seq, a, w)).collect();
        named(vec![
            ("freq_khz", grid.iter().map(|&w| rad_to_khz(w)).collect()),
            ("filter", values),
        ])?
    };
    table.metadata.insert("protocol".into(), protocol.to_string());
    table.metadata.insert("channel".into(), channel.to_string());
    ctx.emit_table(table)
}

fn cmd_phase(ctx: &Context, protocol: Protocol, channel: Channel) -> CliResult<()> {
    let c = &ctx.config;
    let tones = c.tones();
    if tones.is_empty() {
        return Err(usage("no tones configured (tone.amplitude_rad_us, tone.freq_khz)"));
    }
    if tones.iter().any(|t| t.phi.is_none()) {
        return Err(usage("phase needs fixed tone phases (tone.phase_rad)"));
    }
    let seq = c.sequence_params();
    let sweep = c.sweep();
    let xs = sweep.values();
    let mut closed = Vec::with_capacity(xs.len());
    let mut integral = Vec::with_capacity(xs.len());
    for &x in &xs {
        let s = sweep.apply(&seq, x);
        let mut a = 0.0;
        let mut b = 0.0;
        for t in &tones {
            a += phase_closed(t, &s, protocol, channel)?;
            b += phase_integral(t, &s, protocol, channel)?;
        }
        closed.push(a);
        integral.push(b);
    }
    let rel: Vec<f64> = closed
        .iter()
        .zip(&integral)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
        .collect();
    let mut table = named(vec![
        (axis_column(sweep.axis), xs.iter().map(|&x| s_to_us(x)).collect()),
        ("closed_rad", closed),
        ("integral_rad", integral),
        ("rel_error", rel),
    ])?;
    table.metadata.insert("protocol".into(), protocol.to_string());
    table.metadata.insert("channel".into(), channel.to_string());
    ctx.emit_table(table)
}

fn cmd_simulate(ctx: &Context) -> CliResult<()> {
    let c = &ctx.config;
    let cfg = c.sim_config();
    let mut trace = match c.run.protocol {
        SimKind::Deer => simulate_deer_resolute(&cfg, &c.target_spin(), c.run.p_flip)?,
        kind => simulate_trace(&cfg, kind.protocol())?,
    };
    trace.metadata.remove("config");
    trace.metadata.insert("protocol".into(), c.run.protocol.to_string());
    ctx.emit_trace(&trace)
}

#[derive(Serialize)]
struct FisherOutput {
    freq_khz: f64,
    omega_rad_s: f64,
    tau_us: f64,
    tcorr_us: f64,
    amplitude_rad_s: f64,
    /// Phase-averaged information of one sequence (s²).
    exact: f64,
    /// Phase-averaged approximate information of one sequence (s²).
    approx: f64,
    ratio: f64,
    n_sequences: usize,
    total: f64,
    crb: f64,
    duration_s: f64,
}

fn cmd_fisher(ctx: &Context, omega_khz: f64) -> CliResult<()> {
    if !(omega_khz > 0.0 && omega_khz.is_finite()) {
        return Err(usage("--omega-khz must be positive"));
    }
    let c = &ctx.config;
    let seq = c.sequence_params();
    let sensor = c.sensor_params();
    let w = khz_to_rad(omega_khz);
    let a = c.amplitude();
    let exact = fisher_exact_sequence_with_nodes(w, a, &seq, &sensor, c.run.phi_nodes)?;
    let approx = fisher_approx_phase_avg(w, a, &seq, &sensor);
    let n = c.run.n_sequences;
    let total = exact * n as f64;
    let out = FisherOutput {
        freq_khz: omega_khz,
        omega_rad_s: w,
        tau_us: c.sequence.tau_us,
        tcorr_us: c.sequence.tcorr_us,
        amplitude_rad_s: a,
        exact,
        approx,
        ratio: exact / approx,
        n_sequences: n,
        total,
        crb: if total > 0.0 { 1.0 / total } else { f64::INFINITY },
        duration_s: crate::fisher::experiment_duration(&seq, &sensor, n),
    };
    let table = one_row(&[
        ("freq_khz", out.freq_khz),
        ("exact", out.exact),
        ("approx", out.approx),
        ("ratio", out.ratio),
        ("total", out.total),
        ("crb", out.crb),
        ("duration_s", out.duration_s),
    ]);
    ctx.emit_report(&out, table)
}

fn cmd_compare(ctx: &Context) -> CliResult<()> {
    let c = &ctx.config;
    let report = compare_protocols(&c.omega_grid(), &c.comparison_params())?;
    let table = named(vec![
        ("freq_khz", report.omega.iter().map(|&w| rad_to_khz(w)).collect()),
        ("fi_resolute", report.fi_resolute.clone()),
        ("fi_hahn", report.fi_hahn.clone()),
        ("fi_ramsey", report.fi_ramsey.clone()),
        (
            "feasible",
            report.feasible_resolute.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect(),
        ),
    ])?;
    ctx.emit_table(table)
}

fn cmd_optimize(ctx: &Context, omega_khz: f64, tau_us: (f64, f64), tcorr_us: (f64, f64)) -> CliResult<()> {
    if !(omega_khz > 0.0 && omega_khz.is_finite()) {
        return Err(usage("--omega-khz must be positive"));
    }
    let c = &ctx.config;
    let bounds = OptimizeBounds::new(
        (us_to_s(tau_us.0), us_to_s(tau_us.1)),
        (us_to_s(tcorr_us.0), us_to_s(tcorr_us.1)),
    );
    let result = match optimize_sequence(khz_to_rad(omega_khz), c.amplitude(), &c.sensor_params(), &bounds) {
        Ok(r) => r,
        Err(e @ (Error::EmptyRegion(_) | Error::Invalid(_))) => return Err(usage(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let mut table = Table::new(vec!["tau_us".into(), "t_corr_us".into(), "fi".into()]);
    table.push_row(vec![s_to_us(result.tau), s_to_us(result.t_corr), result.fi])?;
    for r in &result.ridges {
        table.push_row(vec![s_to_us(r.tau), s_to_us(r.t_corr), r.fi])?;
    }
    ctx.emit_report(&result, table)
}

fn chirp_setup(ctx: &Context) -> (ChirpParams<f64>, f64, f64) {
    let c = &ctx.config;
    (c.chirp_params(), c.chirp.rabi_mhz * MHZ, c.chirp.line_sigma_mhz * MHZ)
}

#[derive(Serialize)]
struct QOutput {
    q: f64,
    t_p_s: f64,
    span_hz: f64,
    rabi_hz: f64,
    lz_prediction: f64,
    simulated_flip: f64,
}

fn cmd_chirp_q(ctx: &Context) -> CliResult<()> {
    let (chirp, nu, _) = chirp_setup(ctx);
    let q = chirp.q(nu);
    let centered = ChirpParams {
        center_detuning: 0.0,
        ..chirp
    };
    let out = QOutput {
        q,
        t_p_s: chirp.t_p,
        span_hz: chirp.span,
        rabi_hz: nu,
        lz_prediction: landau_zener(q),
        simulated_flip: lz_flip_probability(&centered, nu, 0.0)?,
    };
    let table = one_row(&[
        ("q", out.q),
        ("lz_prediction", out.lz_prediction),
        ("simulated_flip", out.simulated_flip),
    ]);
    ctx.emit_report(&out, table)
}

fn cmd_chirp_lz(ctx: &Context) -> CliResult<()> {
    let (chirp, nu, _) = chirp_setup(ctx);
    let qs = ctx.config.chirp.q_values.clone();
    let rows = qs
        .par_iter()
        .map(|&q| {
            let p = ChirpParams::from_q(chirp.t_p, q, nu, 0.0)?;
            Ok(vec![q, p.span, landau_zener(q), lz_flip_probability(&p, nu, 0.0)?])
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let mut table = Table::new(vec!["q".into(), "span_hz".into(), "lz_prediction".into(), "simulated_flip".into()]);
    for r in rows {
        table.push_row(r)?;
    }
    ctx.emit_table(table)
}

#[derive(Serialize)]
struct EnsembleOutput {
    q: f64,
    chirp_flip: f64,
    pi_flip: f64,
    line_sigma_hz: f64,
}

fn cmd_chirp_ensemble(ctx: &Context) -> CliResult<()> {
    let (chirp, nu, sigma) = chirp_setup(ctx);
    let pi = PulseKind::Pi {
        duration: us_to_s(ctx.config.chirp.pi_us),
    };
    let out = EnsembleOutput {
        q: chirp.q(nu),
        chirp_flip: ensemble_flip(&chirp, nu, sigma)?,
        pi_flip: crate::chirp::line_average(sigma, |d| pi.flip(nu, d))?,
        line_sigma_hz: sigma,
    };
    let table = one_row(&[("q", out.q), ("chirp_flip", out.chirp_flip), ("pi_flip", out.pi_flip)]);
    ctx.emit_report(&out, table)
}

fn cmd_chirp_contrast(ctx: &Context) -> CliResult<()> {
    let (chirp, nu, sigma) = chirp_setup(ctx);
    let c = &ctx.config;
    let points = contrast_vs_q(chirp.t_p, &c.chirp.q_values, nu, sigma, c.sensor.contrast)?;
    let table = named(vec![
        ("q", points.iter().map(|p| p.q).collect()),
        ("span_hz", points.iter().map(|p| p.span).collect()),
        ("flip", points.iter().map(|p| p.flip).collect()),
        ("contrast", points.iter().map(|p| p.contrast).collect()),
    ])?;
    ctx.emit_table(table)
}

fn cmd_chirp_scan(ctx: &Context, pulse: PulseArg) -> CliResult<()> {
    let (chirp, _, _) = chirp_setup(ctx);
    let c = &ctx.config;
    let kind = match pulse {
        PulseArg::Chirp => PulseKind::Chirp(chirp),
        PulseArg::Pi => PulseKind::Pi {
            duration: us_to_s(c.chirp.pi_us),
        },
    };
    let mut trace = deer_frequency_scan(&c.scan_frequencies(), kind, &c.target_spin())?;
    trace.metadata.insert("dip_contrast".into(), dip_contrast(&trace).to_string());
    trace.metadata.insert("dip_full_width_hz".into(), dip_full_width(&trace).to_string());
    ctx.emit_trace(&trace)
}

fn cmd_fit(
    ctx: &Context,
    model: FitModel,
    input: Option<&Path>,
    channel: &str,
    components: usize,
    replicas: usize,
) -> CliResult<()> {
    if model == FitModel::Crb {
        return cmd_fit_crb(ctx, replicas);
    }
    let path = input.ok_or_else(|| usage("--input is required for this model"))?;
    let trace = read_trace(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let (x, y) = trace_xy(&trace, channel).map_err(|e| usage(e.to_string()))?;
    match model {
        FitModel::Periodogram => {
            let pg = periodogram(x, y)?;
            let mut table = named(vec![("freq_hz", pg.freq.clone()), ("power", pg.power.clone())])?;
            table.metadata.insert("channel".into(), channel.into());
            if let Some(p) = pg.peaks().first() {
                table.metadata.insert("peak_hz".into(), p.freq.to_string());
            }
            ctx.emit_table(table)
        }
        FitModel::Cosines | FitModel::Stretched => {
            let fit = if model == FitModel::Cosines {
                fit_decaying_cosines(x, y, components, &CosineFitOptions::default())?
            } else {
                fit_stretched_exp(x, y)?
            };
            for w in &fit.warnings {
                log::warn!("{w}");
            }
            let mut table = fit_table(&fit);
            table.metadata.insert("channel".into(), channel.into());
            ctx.emit_report(&fit, table)
        }
        FitModel::Crb => unreachable!("handled above"),
    }
}

fn cmd_fit_crb(ctx: &Context, replicas: usize) -> CliResult<()> {
    let c = &ctx.config;
    let cfg = c.sim_config();
    let tone: ToneSignal<f64> = match cfg.tones.as_slice() {
        [t] => *t,
        _ => return Err(usage("the crb model needs exactly one configured tone")),
    };
    let phi = tone
        .phi
        .ok_or_else(|| usage("the crb model needs a fixed tone phase (tone.phase_rad)"))?;
    let seq: SequenceParams<f64> = cfg.seq;
    let per = fisher_sequence_at_phase(tone.omega, tone.amplitude, phi, &seq, &cfg.sensor)?;
    let i_total = per * (seq.n_reps as u64 * cfg.shots_per_block) as f64;
    let fits = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let counts = simulate_block_counts(&cfg, r)?;
            fit_frequency_counts(&counts, tone.amplitude, phi, &seq, &cfg.sensor, tone.omega, None)
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let report = crb_report(&fits, "omega", tone.omega, i_total)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let table = one_row(&[
        ("replicas", report.replicas as f64),
        ("truth", report.truth),
        ("bias", report.bias),
        ("mse", report.mse),
        ("mse_stderr", report.mse_stderr),
        ("crb", report.crb),
        ("ratio", report.ratio),
        ("consistent", if report.consistent { 1.0 } else { 0.0 }),
    ]);
    ctx.emit_report(&report, table)
}
