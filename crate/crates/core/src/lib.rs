//! Numerical laboratory for the one-dimensional Dirichlet SPDE
//!
//!     du = (a u_xx + b u_x + c u) dt + xi |u|^{1+lambda} dB,   x in (0,1),
//!
//! driven by space-time white noise, with weighted-Sobolev norm
//! computation, Hölder-exponent and boundary-decay estimation, and a
//! reproducible Monte Carlo harness.
//!
//! The math modules are generic over the scalar type (`Scalar`, i.e. f32
//! or f64); the harness and CLI run on `Real = f64`. Concrete aliases for
//! the common types live at the crate root.

pub mod error;
pub mod estimators;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod noise;
pub mod scalar;
pub mod sobolev;
pub mod solver;
pub mod weight;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the harness and CLI.
pub type Real = f64;

pub type GridFunction64 = grid::GridFunction<Real>;
pub type GridFunction32 = grid::GridFunction<f32>;
pub type Trajectory64 = solver::Trajectory<Real>;
pub type SpdeProblem64 = solver::SpdeProblem<Real>;
pub type SchemeParams64 = solver::SchemeParams<Real>;
pub type WeightFn64 = weight::WeightFn<Real>;
pub type ZetaFamily64 = weight::ZetaFamily<Real>;
pub type SpaceSpec64 = sobolev::SpaceSpec<Real>;
pub type KernelTable64 = sobolev::KernelTable<Real>;
pub type HolderTargets64 = estimators::HolderTargets<Real>;
pub type HolderReport64 = estimators::HolderReport<Real>;
