//! Information-flow estimators over ensembles of filtered trajectories.

mod checks;
mod ensemble;
mod functionals;
mod ledger;

use thiserror::Error;

pub use checks::{tower_property, TowerCheck};
pub use ensemble::{run_ensemble, EnsembleConfig, EnsembleRun, TrajSample};
pub use functionals::{
    cramer_rao_check, de_bruijn_check, entropy_production_rate, fisher_trace_unconditional, free_surprise_rate,
};
pub use ledger::{conditional_entropy_rate, InfoLedger, LedgerMeta, LedgerRow, CSV_HEADER};

use crate::diffusion::SimulationError;
use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("invalid ensemble configuration: {0}")]
    Config(String),
    #[error("diffusion tensor is singular at x={0}")]
    SingularDiffusion(f64),
    #[error("Fisher information is not positive: {0}")]
    SingularFisher(f64),
}

/// Sample mean with standard error `sd/√N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Two-pass mean and unbiased variance, accumulated in iteration order.
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let xs: Vec<f64> = samples.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// `|mean − target| ≤ k·se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Runs `f` on a pool sized by `INFOFLOW_WORKERS` when that variable is
/// set, otherwise on the global pool. Results never depend on the pool.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match std::env::var("INFOFLOW_WORKERS").ok().and_then(|s| s.parse::<usize>().ok()) {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}
