//! Finsler p-capacity of convex bodies.
//!
//! The crate computes the anisotropic p-capacity of a convex body by
//! minimizing a discretized Dirichlet energy `(1/p) sum H^p(Du)` outside the
//! body, and provides numerical checks of the rigidity properties that single
//! out Wulff shapes among convex bodies: the concavity exponent of the
//! capacitary potential, homothety of its level sets, constancy of `H(Du)` on
//! the outer sphere of an annulus, the Brunn–Minkowski inequality for capacity
//! and the scaling law of level-set capacities.
//!
//! Modules:
//! - [`norms`]: anisotropic norms, dual norms, regularity diagnostics.
//! - [`bodies`]: convex bodies through support functions.
//! - [`pde`]: grids, the discrete energy, the minimizer, exact radial solutions.
//! - [`analysis`]: the theorem-verification checks and their reports.

pub mod analysis;
pub mod bodies;
pub mod directions;
pub mod error;
pub mod norms;
pub mod pde;
pub mod vecops;

pub use error::{FcapError, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/norms.md")]
    mod norms {}
    #[doc = include_str!("../../../book/src/bodies.md")]
    mod bodies {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/checks.md")]
    mod checks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
