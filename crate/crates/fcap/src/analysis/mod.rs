//! Checks that compare solved fields against the rigidity and comparison
//! statements for Finsler capacitary potentials.

pub mod alpha;
pub mod asymptotic;
pub mod checks;
pub mod exact;
pub mod report;
pub mod suite;

pub use alpha::{check_alpha, estimate_alpha, AlphaEstimate, AlphaOptions};
pub use asymptotic::{asymptotic_constant, default_radii};
pub use checks::{
    check_bm, check_bm_with, check_homothetic_levels, check_overdetermined, check_scaling,
    field_capacity, level_clearance, outer_gradient_samples, rescaled_capacity,
};
pub use exact::{check_norm_identities, check_radial};
pub use report::{provenance, TheoremReport, Verdict};
