//! Observation-adapted feedback: policies, the mean drift `v̄`, and the
//! controlled experiment.

mod experiment;
mod policy;

pub use experiment::{
    controlled_kalman_ensemble, mean_drift, run_controlled_experiment, ControlledLedger, KalmanEnsemble,
};
pub use policy::{apply_policy, ControlPolicy, PolicyError, PolicyKind, PosteriorSummary};
