//! Bilinear finite elements on uniform rectangular grids.

mod assembly;
mod grid;
mod norms;
mod solve;
mod sparse;

pub use assembly::{
    assemble_convection, assemble_convection_gauss, assemble_diffusion, assemble_diffusion_mapped,
    assemble_diffusion_tensor, assemble_lumped_mass, assemble_robin, assemble_robin_with, boundary_mass,
    flux_at_gauss, velocity_from_stream_function, ElementBasis, GaussVelocity, Tensor2,
};
pub use grid::{BoundaryEdge, Side, StructuredGrid};
pub use norms::{
    boundary_distance_spacetime, boundary_l2_norm_sq, h1_seminorm_sq, l2_distance, l2_distance_spacetime,
    l2_inner, l2_norm, l2_norm_sq,
};
pub use solve::{solve_general, solve_spd, LinearSolve};
pub use sparse::CsrMatrix;
