//! Simulation of vacuum-stimulated Raman adiabatic passage: a Λ-type atom
//! falls through a high-finesse cavity and a displaced pump beam, and a
//! single photon is transferred into the cavity mode via the dark state.

#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod drive;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod observables;
pub mod params;
pub mod sweeps;

pub use drive::{GeometryOffsets, Transit};
pub use engine::{propagate, propagate_default, DensityState, IntegratorConfig, Trajectory};
pub use ensemble::{EnsembleConfig, Estimate};
pub use error::{Error, Result};
pub use model::{Basis, BasisState, Level, Model};
pub use params::{mhz, to_mhz, SystemParams};
