//! Discrete differential operators, implicit solves, transport and smoothing.

pub mod advect;
pub mod mollify;
pub mod stencil;
pub mod transform;
pub mod workspace;

pub use advect::{advect_conservative, advective_flux, cell_rates, face_velocities, flux_divergence, outflow_rate, AdvectionScheme};
pub use mollify::{mollify, Mollifier};
pub use stencil::{divergence, gradient, laplacian, partial, second_partial};
pub use workspace::{DiffusionScheme, OperatorWorkspace, PressureSolver, Projection};
