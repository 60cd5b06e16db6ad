//! Finite-element flow solvers: the 2D isoP2/P1 scheme and the 1D shear
//! reduction.

pub mod banded;
pub mod couette;
pub mod flow;
pub mod mesh;

pub use flow::{BoundaryData, FlowConfig, FlowSolver, MacroState};
pub use mesh::{MeshPair, Triangulation};
