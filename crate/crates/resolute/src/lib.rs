//! Simulation and estimation toolkit for phase-cycled Ramsey-correlation
//! sensing.
//!
//! The analytic layers (phases, filter functions, block probabilities,
//! Fisher information, chirped-pulse dynamics) are generic over [`Real`].
//! The aliases below fix the scalar to `f64`, which is what the simulator,
//! the fitting engine and the command line use.

pub mod block;
pub mod chirp;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod filter;
pub mod fisher;
pub mod io;
pub mod model;
pub mod phase;
pub mod quadrature;
pub mod real;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
pub use real::Real;

pub type SensorParams = model::SensorParams<f64>;
pub type ToneSignal = model::ToneSignal<f64>;
pub type DcTerms = model::DcTerms<f64>;
pub type NoiseParams = model::NoiseParams<f64>;
pub type SequenceParams = model::SequenceParams<f64>;
pub type TargetSpin = model::TargetSpin<f64>;
pub type DecayFactors = block::DecayFactors<f64>;

pub type SensorParamsF32 = model::SensorParams<f32>;
pub type ToneSignalF32 = model::ToneSignal<f32>;
pub type SequenceParamsF32 = model::SequenceParams<f32>;

pub use model::{BlockSpec, MiddlePhase, ReadoutSign, Species};
pub use phase::{Channel, Protocol};
