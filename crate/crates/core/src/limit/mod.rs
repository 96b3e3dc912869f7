//! The sharp-interface limit: constants, optimal profiles, jump templates
//! and recovery pairs.

pub mod constants;
pub mod profile;
pub mod recovery;
pub mod template;

pub use constants::{
    conjugate, limit_constants, limit_constants_quadrature, LimitConstants, PhaseParams,
};
pub use profile::{optimal_profile, rho_of_eps, ProfileSolution, RhoRule};
pub use recovery::{
    build_recovery, cell_regions, limsup_cells, limsup_check, region_energies, sigma_range,
    LimsupOptions, LimsupRow, Recovery, Region, RegionEnergies,
};
pub use template::{
    bar_limit_minimum, bar_transition, limit_energy, sigma_k, BarLimit, BoundaryMismatch,
    JumpShape, JumpTemplate, LimitEnergy, LimitModel, LimitQuadrature,
};
