//! Phase-averaged filter functions `⟨Φ²⟩_φ`.
//!
//! Every phase above has the form `E(ω)·sin(θ(ω) + φ)` or `E(ω)·cos(..)`,
//! so averaging over a uniform signal phase yields `E²/2`.

use crate::error::{Error, Result};
use crate::model::SequenceParams;
use crate::phase::{Channel, Protocol};
use crate::real::{sinc, Real};
use serde::{Deserialize, Serialize};

/// Mean-square phase for a tone of the given amplitude and angular frequency.
///
/// Ramsey uses `τ` as the window length, Hahn echo uses `τ` as the echo
/// length, and the correlation sequence uses both `τ` and `T_corr`.
pub fn filter_function<T: Real>(
    protocol: Protocol,
    channel: Channel,
    seq: &SequenceParams<T>,
    amplitude: T,
    omega: T,
) -> T {
    let half = T::lit(0.5);
    let four = T::lit(4.0);
    let tau = seq.tau;
    let scale = half * amplitude * amplitude * tau * tau;
    match protocol {
        Protocol::Ramsey => {
            let s = sinc(omega * tau / T::lit(2.0));
            scale * s * s
        }
        Protocol::HahnEcho => {
            let q = omega * tau / four;
            let e = q.sin() * sinc(q);
            scale * e * e
        }
        Protocol::Resolute => {
            let s = sinc(omega * tau / four);
            let inner = omega * seq.t_corr / T::lit(2.0) + omega * tau / four;
            let m = match channel {
                Channel::Sum => inner.cos(),
                Channel::Diff => inner.sin(),
            };
            scale * m * m * s * s
        }
    }
}

/// Filter values on a `T_corr × ω` grid at fixed `τ`, stored row-major with
/// one row per `T_corr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMap {
    pub tau: f64,
    pub amplitude: f64,
    pub channel: Channel,
    pub t_corr: Vec<f64>,
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
}

impl FilterMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.omega.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.omega.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.t_corr.len()).map(|r| self.get(r, col)).collect()
    }
}

fn check_grid(grid: &[f64], name: &'static str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid(name));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

pub fn filter_map(
    t_corr_grid: &[f64],
    omega_grid: &[f64],
    tau: f64,
    amplitude: f64,
    channel: Channel,
) -> Result<FilterMap> {
    check_grid(t_corr_grid, "t_corr")?;
    check_grid(omega_grid, "omega")?;
    let mut values = Vec::with_capacity(t_corr_grid.len() * omega_grid.len());
    for &tc in t_corr_grid {
        let seq = SequenceParams::new(tau, tc, 1);
        for &w in omega_grid {
            values.push(filter_function(Protocol::Resolute, channel, &seq, amplitude, w));
        }
    }
    Ok(FilterMap {
        tau,
        amplitude,
        channel,
        t_corr: t_corr_grid.to_vec(),
        omega: omega_grid.to_vec(),
        values,
    })
}

/// Correlation times where the channel's filter peaks for a tone at `omega`:
/// `ωT̃ = 2πn` for Sum and `ωT̃ = (2n+1)π` for Diff, with `T̃ = T_corr + τ/2`.
pub fn resonant_t_corr(channel: Channel, tau: f64, omega: f64, t_max: f64) -> Vec<f64> {
    let offset = match channel {
        Channel::Sum => 0.0,
        Channel::Diff => 0.5,
    };
    let period = 2.0 * std::f64::consts::PI / omega;
    (0..)
        .map(|n| (n as f64 + offset) * period - tau / 2.0)
        .skip_while(|&t| t <= 0.0)
        .take_while(|&t| t <= t_max)
        .collect()
}
