//! Micro-macro simulation of dilute polymeric fluids.
//!
//! Dumbbell configurations at every material point are represented by a
//! deterministic particle ensemble that follows the gradient flow of a
//! kernel-regularized free energy. The ensembles feed the Kramers stress into
//! an incompressible finite-element flow solver, and the flow deforms and
//! advects the ensembles in return.

pub mod checkpoint;
pub mod coupling;
pub mod energy;
pub mod error;
pub mod exec;
pub mod fem;
pub mod micro;
pub mod potentials;
pub mod rng;
pub mod scenarios;
pub mod stress;

pub use energy::Ensemble;
pub use error::{Error, Result};
pub use exec::Exec;
pub use potentials::{BandwidthPolicy, Kernel, Mat2, Potential, PotentialKind, Vec2};
