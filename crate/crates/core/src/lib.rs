//! Numerical laboratory for the space-homogeneous Boltzmann equation in two
//! dimensions with product collision kernels.
//!
//! The crate evaluates the collision operator for the singular "unit square"
//! kernel (and smooth approximations of it), the entropy, the entropy
//! production and its time derivative, and flows gridded densities in time.
//! Its headline use is to exhibit a density whose entropy production
//! increases along the flow.

pub mod entropy;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod profile;
pub mod quadrature;
pub mod velocity;

pub use entropy::{
    dt_entropy_production, entropy, entropy_production_direct, entropy_production_symmetric,
    l_potential, region_report, AnnulusDecomposition, DiagnosticsReport, Region, RegionSummary,
};
pub use error::{Error, Result};
pub use grid::{grid_interpolate, profile_to_grid, GridSpec, Moments, ScalarGridField};
pub use kernel::{
    kernel_eval, post_collision_velocities, square_configuration, AngularPart, KernelSpec,
    RadialPart, SquareConfiguration,
};
pub use operator::{
    collision_moments, collision_moments_polar, q_gain_singular, q_loss_singular, q_mollified,
    q_on_grid, q_singular, CollisionRates,
};
pub use profile::{
    build_counterexample, eval_profile, CounterexampleParams, Density, Maxwellian,
    RadialStepProfile,
};
pub use quadrature::OperatorQuadrature;
pub use velocity::Velocity;
