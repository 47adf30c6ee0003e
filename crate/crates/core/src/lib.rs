//! Finite-temperature kicked Tonks-Girardeau gas on a lattice.
//!
//! Hard-core bosons are mapped to free fermions; the grand-canonical thermal
//! state is Gaussian and is evolved at the single-particle level. Bosonic
//! one-particle density matrices follow from Jordan-Wigner sign strings as
//! determinants of `𝒩×𝒩` matrices.
//!
//! All numerical types are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the production scalar `f64`.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod opdm;
pub mod oracle;
pub mod roots;
pub mod scalar;
pub mod thermal;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Lattice = lattice::LatticeModel<f64>;
pub type Schedule = lattice::KickSchedule<f64>;
pub type Grid = lattice::MomentumGrid<f64>;
pub type Thermal = thermal::ThermalState<f64>;
pub type Propagator = evolution::PropagatorState<f64>;
pub type Orbitals = evolution::OrbitalState<f64>;
pub type Snapshot = evolution::EvolvedThermal<f64>;
pub type Operators = evolution::FloquetOperators<f64>;
pub type Density = opdm::Opdm<f64>;
