//! Semiclassical FLRW cosmology with conformally coupled scalar fields in
//! states of low energy: mode functions, renormalised energy densities and
//! the Friedmann equation extended by the local curvature term `ε J00`.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! `f64`. Internal units set `H0 = 1`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod energy;
pub mod error;
pub mod friedmann;
pub mod modes;
pub mod numerics;
pub mod scalar;
pub mod states;
pub mod units;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type CosmologyParams = background::CosmologyParams<f64>;
pub type LcdmFrame = background::LcdmFrame<f64>;
pub type CurvatureTensors00 = background::CurvatureTensors00<f64>;
pub type ModeSpec = modes::ModeSpec<f64>;
pub type ModeFunction = modes::ModeFunction<f64>;
pub type SamplingFunction = states::SamplingFunction<f64>;
pub type StateOfLowEnergy = states::StateOfLowEnergy<f64>;
pub type GeneralizedThermalState = states::GeneralizedThermalState<f64>;
pub type RenormalizationChoice = energy::RenormalizationChoice<f64>;
pub type EnergyDensityBreakdown = energy::EnergyDensityBreakdown<f64>;
pub type ExtendedFriedmannSolution = friedmann::ExtendedFriedmannSolution<f64>;
pub type EffectiveRadiation = friedmann::EffectiveRadiation<f64>;
