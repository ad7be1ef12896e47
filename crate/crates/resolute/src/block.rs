//! Bloch-vector propagation of one phase-cycled block.
//!
//! Conventions: `|0⟩` is the +z pole and `P0 = ½(1 + C·z)` at readout.
//! Rotations are right-handed. A block is
//!
//! 1. `R_x(π/2)` from `|0⟩`,
//! 2. precession by `φ₁` about z, transverse scaled by `√d_sense`,
//! 3. `R_m(π/2)` with `m` the block's middle axis (x or y),
//! 4. correlation period: transverse erased, z scaled by `d_store`,
//! 5. `R_m(π/2)` again,
//! 6. precession by `φ₂`, transverse scaled by `√d_sense`,
//! 7. readout `R_{±x}(π/2)`.
//!
//! This gives `P0(X,±) = ½(1 ± C·d·cos φ₁ cos φ₂)` and
//! `P0(Y,±) = ½(1 ∓ C·d·sin φ₁ sin φ₂)` with `d = d_sense·d_store`.

use crate::model::{BlockSpec, MiddlePhase, NoiseParams, ReadoutSign, SensorParams};
use crate::phase::Channel;
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Coherence survival over the sensing windows and population survival over
/// the correlation period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFactors<T> {
    pub d_sense: T,
    pub d_store: T,
}

impl<T: Real> DecayFactors<T> {
    pub const fn new(d_sense: T, d_store: T) -> Self {
        Self { d_sense, d_store }
    }

    pub fn none() -> Self {
        Self::new(T::one(), T::one())
    }

    /// `d_sense = e^(−τ/T2p)`, `d_store = e^(−T_corr/T1)`.
    pub fn from_times(tau: T, t_corr: T, sensor: &SensorParams<T>) -> Self {
        Self::new((-tau / sensor.t2_p).exp(), (-t_corr / sensor.t1).exp())
    }

    pub fn total(&self) -> T {
        self.d_sense * self.d_store
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bloch<T> {
    x: T,
    y: T,
    z: T,
}

impl<T: Real> Bloch<T> {
    fn rot_x(self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            x: self.x,
            y: self.y * c - self.z * s,
            z: self.y * s + self.z * c,
        }
    }

    fn rot_y(self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            x: self.x * c + self.z * s,
            y: self.y,
            z: -self.x * s + self.z * c,
        }
    }

    fn precess(self, phi: T) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            x: self.x * c - self.y * s,
            y: self.x * s + self.y * c,
            z: self.z,
        }
    }

    fn dephase(self, factor: T) -> Self {
        Self {
            x: self.x * factor,
            y: self.y * factor,
            z: self.z,
        }
    }

    fn store(self, d_store: T) -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            z: self.z * d_store,
        }
    }

    fn middle(self, phase: MiddlePhase, theta: T) -> Self {
        match phase {
            MiddlePhase::X => self.rot_x(theta),
            MiddlePhase::Y => self.rot_y(theta),
        }
    }
}

/// Ground-state probability after one block, by explicit propagation.
pub fn propagate_block<T: Real>(
    block: BlockSpec,
    phi1: T,
    phi2: T,
    decay: DecayFactors<T>,
    contrast: T,
) -> T {
    let quarter = T::FRAC_PI_2();
    let root = decay.d_sense.sqrt();
    let readout = match block.readout_sign {
        ReadoutSign::Plus => quarter,
        ReadoutSign::Minus => -quarter,
    };
    let v = Bloch {
        x: T::zero(),
        y: T::zero(),
        z: T::one(),
    }
    .rot_x(quarter)
    .precess(phi1)
    .dephase(root)
    .middle(block.middle_phase, quarter)
    .store(decay.d_store)
    .middle(block.middle_phase, quarter)
    .precess(phi2)
    .dephase(root)
    .rot_x(readout);
    let p = T::lit(0.5) * (T::one() + contrast * v.z);
    p.max(T::zero()).min(T::one())
}

/// Closed form of [`propagate_block`] together with its partial derivatives
/// in `φ₁` and `φ₂`: returns `(P0, ∂P0/∂φ₁, ∂P0/∂φ₂)`.
pub fn block_p0_closed<T: Real>(
    block: BlockSpec,
    phi1: T,
    phi2: T,
    decay: DecayFactors<T>,
    contrast: T,
) -> (T, T, T) {
    let half = T::lit(0.5);
    let k = half * contrast * decay.total() * block.readout_sign.value::<T>();
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    match block.middle_phase {
        MiddlePhase::X => (half + k * c1 * c2, -k * s1 * c2, -k * c1 * s2),
        MiddlePhase::Y => (half - k * s1 * s2, -k * c1 * s2, -k * s1 * c2),
    }
}

/// Forms `(S⁺, S⁻)` from the four block probabilities.
///
/// `S_x = P(X,+) − P(X,−) = C·d·cos φ₁ cos φ₂` and
/// `S_y = P(Y,+) − P(Y,−) = −C·d·sin φ₁ sin φ₂`, so
/// `S⁺ = S_x + S_y = C·d·cos(φ₁+φ₂)` and `S⁻ = S_x − S_y = C·d·cos(φ₁−φ₂)`.
pub fn combine_channels<T: Real>(p_xplus: T, p_xminus: T, p_yplus: T, p_yminus: T) -> (T, T) {
    let sx = p_xplus - p_xminus;
    let sy = p_yplus - p_yminus;
    (sx + sy, sx - sy)
}

/// Which quadrature of a single accumulated phase a block projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Cos,
    Sin,
}

/// Ground-state probability of a single-phase block (Ramsey or Hahn echo):
/// `½(1 ± C·d·cos Φ)` or `½(1 ± C·d·sin Φ)`, together with `∂P0/∂Φ`.
///
/// For Hahn echo with a `+x` readout the cosine quadrature is the natural
/// output; for Ramsey the readout axis is chosen so the `+` block also
/// projects onto `cos Φ`, and the sine quadrature uses a readout rotated by
/// 90° about z.
pub fn single_phase_p0<T: Real>(
    quadrature: Quadrature,
    sign: ReadoutSign,
    phase: T,
    decay: T,
    contrast: T,
) -> (T, T) {
    let half = T::lit(0.5);
    let k = half * contrast * decay * sign.value::<T>();
    let (s, c) = phase.sin_cos();
    match quadrature {
        Quadrature::Cos => (half + k * c, -k * s),
        Quadrature::Sin => (half + k * s, k * c),
    }
}

/// Ensemble decay factor of a channel under Gaussian noise:
/// Sum `e^(−τ²/α₁)`, Diff `e^(−τ²/(4α₂))`.
pub fn analytic_envelope<T: Real>(channel: Channel, tau: T, noise: &NoiseParams<T>) -> T {
    match channel {
        Channel::Sum => (-(tau * tau) / noise.alpha_corr).exp(),
        Channel::Diff => (-(tau * tau) / (T::lit(4.0) * noise.alpha_fast)).exp(),
    }
}

/// Ramsey reference envelope `e^(−τ²/(4α))` with `α` in s².
pub fn ramsey_envelope<T: Real>(tau: T, alpha: T) -> T {
    (-(tau * tau) / (T::lit(4.0) * alpha)).exp()
}

/// Ramsey envelope for a field-valued noise scale: `e^(−γ²τ²/(4α))` with
/// `α` in G⁻² and `γ` in rad s⁻¹ G⁻¹.
pub fn ramsey_envelope_field<T: Real>(tau: T, alpha_field: T, gamma: T) -> T {
    ramsey_envelope(gamma * tau, alpha_field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    type M = [[C; 2]; 2];

    fn mul(a: &M, b: &M) -> M {
        let mut r = [[C::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    r[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        r
    }

    fn dagger(a: &M) -> M {
        [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
    }

    /// exp(−iθ n·σ/2) for a unit axis n.
    fn rotation(n: [f64; 3], theta: f64) -> M {
        let (s, c) = (theta / 2.0).sin_cos();
        let i = C::new(0.0, 1.0);
        [
            [C::new(c, 0.0) - i * s * n[2], -i * s * C::new(n[0], -n[1])],
            [-i * s * C::new(n[0], n[1]), C::new(c, 0.0) + i * s * n[2]],
        ]
    }

    fn apply(u: &M, rho: &M) -> M {
        mul(&mul(u, rho), &dagger(u))
    }

    fn dephase(rho: &M, f: f64) -> M {
        [[rho[0][0], rho[0][1] * f], [rho[1][0] * f, rho[1][1]]]
    }

    fn density_oracle(block: BlockSpec, phi1: f64, phi2: f64, d: DecayFactors<f64>, contrast: f64) -> f64 {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let z = [0.0, 0.0, 1.0];
        let m = match block.middle_phase {
            MiddlePhase::X => x,
            MiddlePhase::Y => y,
        };
        let ro = match block.readout_sign {
            ReadoutSign::Plus => PI / 2.0,
            ReadoutSign::Minus => -PI / 2.0,
        };
        let zero = C::new(0.0, 0.0);
        let mut rho: M = [[C::new(1.0, 0.0), zero], [zero, zero]];
        rho = apply(&rotation(x, PI / 2.0), &rho);
        rho = apply(&rotation(z, phi1), &rho);
        rho = dephase(&rho, d.d_sense.sqrt());
        rho = apply(&rotation(m, PI / 2.0), &rho);
        let pz = (rho[0][0] - rho[1][1]).re * d.d_store;
        rho = [[C::new(0.5 * (1.0 + pz), 0.0), zero], [zero, C::new(0.5 * (1.0 - pz), 0.0)]];
        rho = apply(&rotation(m, PI / 2.0), &rho);
        rho = apply(&rotation(z, phi2), &rho);
        rho = dephase(&rho, d.d_sense.sqrt());
        rho = apply(&rotation(x, ro), &rho);
        let z_final = (rho[0][0] - rho[1][1]).re;
        0.5 * (1.0 + contrast * z_final)
    }

    #[test]
    fn x_block_without_phase_is_bright() {
        let p: f64 = propagate_block(BlockSpec::ALL[0], 0.0, 0.0, DecayFactors::none(), 1.0);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn y_block_with_zero_first_phase_is_half() {
        for phi2 in [0.0, 0.3, 2.0, 5.9] {
            let p: f64 = propagate_block(BlockSpec::ALL[2], 0.0, phi2, DecayFactors::none(), 1.0);
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn static_field_gives_full_diff_signal() {
        let phi = 0.83;
        let p: Vec<f64> = BlockSpec::ALL
            .iter()
            .map(|&b| propagate_block(b, phi, phi, DecayFactors::none(), 1.0))
            .collect();
        let (_, minus) = combine_channels(p[0], p[1], p[2], p[3]);
        assert!((minus - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quarter_turn_phases() {
        let h = PI / 2.0;
        let p: Vec<f64> = BlockSpec::ALL
            .iter()
            .map(|&b| propagate_block(b, h, h, DecayFactors::none(), 1.0))
            .collect();
        let (plus, minus) = combine_channels(p[0], p[1], p[2], p[3]);
        assert!((plus + 1.0).abs() < 1e-14);
        assert!((minus - 1.0).abs() < 1e-14);
    }

    #[test]
    fn envelopes_at_zero_and_reference_point() {
        let noise = NoiseParams {
            alpha_corr: 1e-12,
            alpha_fast: 6.5025e-12,
            seed: 0,
        };
        assert_eq!(analytic_envelope(Channel::Sum, 0.0, &noise), 1.0);
        assert_eq!(analytic_envelope(Channel::Diff, 0.0, &noise), 1.0);
        let e = analytic_envelope(Channel::Diff, 5.1e-6, &noise);
        assert!((e - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(ramsey_envelope(0.0, 1.0), 1.0);
        assert!((ramsey_envelope_field(2.0_f64, 3.0, 1.5) - ramsey_envelope(3.0, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn hahn_cos_quadrature_matches_propagation() {
        let (pa, pb) = (0.7_f64, -0.4_f64);
        let b = Bloch { x: 0.0, y: 0.0, z: 1.0 }
            .rot_x(PI / 2.0)
            .precess(pa)
            .rot_x(PI)
            .precess(pb)
            .rot_x(PI / 2.0);
        let (p, _) = single_phase_p0(Quadrature::Cos, ReadoutSign::Plus, pa - pb, 1.0, 1.0);
        assert!((p - 0.5 * (1.0 + b.z)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn matches_density_matrix_oracle(
            phi1 in -10.0_f64..10.0,
            phi2 in -10.0_f64..10.0,
            ds in 0.05_f64..1.0,
            dst in 0.05_f64..1.0,
            c in 0.1_f64..1.0,
            k in 0usize..4,
        ) {
            let b = BlockSpec::ALL[k];
            let d = DecayFactors::new(ds, dst);
            let p = propagate_block(b, phi1, phi2, d, c);
            let o = density_oracle(b, phi1, phi2, d, c);
            prop_assert!((p - o).abs() <= 1e-12);
            let (pc, _, _) = block_p0_closed(b, phi1, phi2, d, c);
            prop_assert!((p - pc).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn channels_match_cosines(phi1 in -6.0_f64..6.0, phi2 in -6.0_f64..6.0, d in 0.1_f64..1.0) {
            let dec = DecayFactors::new(d, 1.0);
            let p: Vec<f64> = BlockSpec::ALL.iter().map(|&b| propagate_block(b, phi1, phi2, dec, 0.9)).collect();
            let (plus, minus) = combine_channels(p[0], p[1], p[2], p[3]);
            prop_assert!((plus - 0.9 * d * (phi1 + phi2).cos()).abs() < 1e-12);
            prop_assert!((minus - 0.9 * d * (phi1 - phi2).cos()).abs() < 1e-12);
        }

        #[test]
        fn closed_form_derivatives(phi1 in -6.0_f64..6.0, phi2 in -6.0_f64..6.0, k in 0usize..4) {
            let b = BlockSpec::ALL[k];
            let d = DecayFactors::new(0.8, 0.7);
            let h = 1e-6;
            let (_, d1, d2) = block_p0_closed(b, phi1, phi2, d, 1.0);
            let f1 = (block_p0_closed(b, phi1 + h, phi2, d, 1.0).0 - block_p0_closed(b, phi1 - h, phi2, d, 1.0).0) / (2.0 * h);
            let f2 = (block_p0_closed(b, phi1, phi2 + h, d, 1.0).0 - block_p0_closed(b, phi1, phi2 - h, d, 1.0).0) / (2.0 * h);
            prop_assert!((d1 - f1).abs() < 1e-8);
            prop_assert!((d2 - f2).abs() < 1e-8);
        }
    }
}
