//! Multilevel approximation of congested compressible flow of a
//! non-Newtonian fluid with inflow/outflow boundaries, with audits of the
//! a priori estimates along each limit passage.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix it to
//! `f64`, which is what the driver, the verdicts and the binary use.

pub mod cli;
pub mod congestion;
pub mod continuity;
pub mod domain;
pub mod energy;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod momentum;
pub mod potential;
pub mod quadrature;
pub mod run;
pub mod scalar;
pub mod tensors;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor = tensors::SymTensor<f64>;
pub type Mesh = domain::Mesh<f64>;
pub type BoundarySpec = domain::BoundarySpec<f64>;
pub type BoundaryData = domain::BoundaryData<f64>;
pub type PotentialSpec = potential::PotentialSpec<f64>;
pub type MollifiedPotential = potential::MollifiedPotential<f64>;
pub type DensityField = continuity::DensityField<f64>;
pub type FaceVelocity = continuity::FaceVelocity<f64>;
pub type MassLedger = continuity::MassLedger<f64>;
pub type MaxPrincipleTracker = continuity::MaxPrincipleTracker<f64>;
pub type GalerkinBasis = momentum::GalerkinBasis<f64>;
pub type VelocityState = momentum::VelocityState<f64>;
pub type MomentumProblem<'a> = momentum::MomentumProblem<'a, f64>;
pub type EnergyLedger = energy::EnergyLedger<f64>;
pub type CongestionPressure = congestion::CongestionPressure<f64>;
pub type CongestionReport = congestion::CongestionReport<f64>;
