//! Stochastic simulation of an electron wavepacket coupled to a thermal
//! acoustic lattice, with perturbation-theory scattering rates as an
//! independent benchmark.
//!
//! The field numerics ([`grid`], [`bath`], [`noise`], [`propagator`],
//! [`observables`]) are generic over the [`Real`] scalar; the aliases at the
//! crate root fix them to `f64`.

pub mod bath;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod material;
pub mod noise;
pub mod observables;
pub mod perturbation;
pub mod propagator;
pub mod quadrature;
pub mod scalar;
pub mod simulation;
pub mod units;

pub use error::{Error, Result};
pub use material::{coupling_class, derive_parameters, rms_deformation, CouplingClass, CouplingRegime, DerivedParams, MaterialParams};
pub use scalar::{Cplx, Real};
pub use units::UnitSystem;

pub type Grid = grid::Grid2D<f64>;
pub type ModeSet = bath::ModeSet<f64>;
pub type CoherentAmplitudes = bath::CoherentAmplitudes<f64>;
