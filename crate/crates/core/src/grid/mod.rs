//! 1D finite-volume densities and the Fokker–Planck / Zakai /
//! Kushner–Stratonovich solvers.

mod density;
mod filter;
mod fp;
mod ops;

use thiserror::Error;

pub use density::{Divergence, Grid1D, GridDensity, DENSITY_FLOOR, SCORE_GATE};
pub use filter::{apply_likelihood, ks_step, normalize, observation_table, zakai_step, zakai_step_normalized};
pub use fp::{fp_advance, fp_step, steady_state_grid, steady_state_iterate, FpOperator, FpScratch};
pub use ops::{gamma_on_grid, generator_on_grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 16 cells, got {0}")]
    TooFewCells(usize),
    #[error("grid bounds must satisfy x_min < x_max, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("grid solvers are one-dimensional; model has state dimension {0}")]
    NotOneDimensional(usize),
    #[error("time step {dt} exceeds the stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("unstable step: density reached {min} (max {max})")]
    UnstableStep { min: f64, max: f64 },
    #[error("filter collapse: total mass {0}")]
    FilterCollapse(f64),
    #[error("likelihood exponent overflow: max exponent {max_exponent}, max |h·ΔY| {max_h_dy}")]
    ExponentOverflow { max_exponent: f64, max_h_dy: f64 },
    #[error("densities live on different grids")]
    GridMismatch,
    #[error("steady-state iteration did not converge within t={0}")]
    NoConvergence(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("values length {got} does not match {expected} cells")]
    Length { expected: usize, got: usize },
}
