//! Discrete solvers for the exterior and annulus capacity problems.

pub mod energy;
pub mod field;
pub mod grid;
pub mod ncg;
pub mod radial;
pub mod solve;

pub use energy::Energy;
pub use field::{GradientField, ScalarField};
pub use grid::{Grid, Mask, NodeClass, OuterData};
pub use radial::*;
pub use solve::{solve_annulus, solve_exterior, OuterBc, RadiusRecord, SolveResult, SolverOptions};
