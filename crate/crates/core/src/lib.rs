//! Numerical laboratory for entropy production and information flow in
//! filtered Markov diffusions.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffusion`]: diffusion models, the co-metric `Γ`, the corrected
//!   velocity `u`, and an Euler–Maruyama simulator for the coupled
//!   state/observation system.
//! - [`gaussian`]: the exact linear-Gaussian stack (Lyapunov and Riccati
//!   propagation, the surprise ledger, the Kalman–Bucy filter and its
//!   closed-form information rates).
//! - [`grid`]: 1D finite-volume solvers for the Fokker–Planck, Zakai and
//!   Kushner–Stratonovich equations plus density functionals.
//! - [`metrics`]: ensemble runs and the Monte-Carlo estimators of the
//!   supplied/dissipated information rates and mutual information.
//! - [`feedback`]: observation-adapted control policies and the controlled
//!   experiment.
//! - [`runner`]: scenario configs, ledger output and the built-in check
//!   suites.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diffusion;
pub mod feedback;
pub mod gaussian;
pub mod grid;
pub mod metrics;
pub mod rng;
pub mod runner;

pub use diffusion::{DiffusionModel, JointPath, SmoothField};
pub use gaussian::{GaussianBelief, LinearModel};
pub use grid::{Grid1D, GridDensity};
pub use metrics::{Estimate, InfoLedger};
