//! Diffusion models and their generator geometry.

mod field;
mod geometry;
mod model;
pub mod presets;
mod simulate;

pub use field::SmoothField;
pub use geometry::{divergence_drift, divergence_u, gamma, sigma_at, u_field};
pub use model::{DiffusionModel, ModelBuilder, ModelError};
pub use simulate::{simulate_joint, InitialDistribution, JointPath, PathStepper, SimulationError};
