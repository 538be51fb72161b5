use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{ControlPolicy, PosteriorSummary};
use crate::diffusion::{presets, DiffusionModel, InitialDistribution, PathStepper, SimulationError};
use crate::gaussian::{kb_info_rates, rk4_lyapunov_step, GaussianBelief, GaussianError, KalmanBucyFilter, LinearModel};
use crate::metrics::{run_ensemble, EnsembleConfig, EnsembleRun, Estimate, InfoLedger, MetricsError};

/// `v̄(x) = (1/N) Σ_k v(x, β_k)` at each point of `xs`.
pub fn mean_drift(model: &DiffusionModel, controls: &[Vec<f64>], xs: &[f64]) -> Vec<f64> {
    let n = controls.len() as f64;
    xs.iter().map(|&x| controls.iter().map(|b| model.drift_1d(x, b)).sum::<f64>() / n).collect()
}

/// Information ledger of a feedback-controlled ensemble.
#[derive(Debug, Clone)]
pub struct ControlledLedger {
    pub ledger: InfoLedger,
    /// `𝔼[β(t)]` at each ledger row.
    pub mean_control: Vec<Vec<f64>>,
    /// Face values of `v̄(·, t)` at each ledger row.
    pub vbar_snapshots: Vec<Vec<f64>>,
    pub clamp_count: usize,
    pub run: EnsembleRun,
}

/// Runs the filter-in-the-loop experiment: each trajectory's filter uses its
/// own control, the shared prior uses `v̄`.
pub fn run_controlled_experiment(
    model: &DiffusionModel,
    policy: &ControlPolicy,
    config: &EnsembleConfig,
) -> Result<ControlledLedger, MetricsError> {
    if model.dim_control() == 0 {
        return Err(MetricsError::Config(format!("model {} accepts no control", model.name())));
    }
    let run = run_ensemble(model, config, Some(policy))?;
    Ok(ControlledLedger {
        ledger: run.ledger.clone(),
        mean_control: run.mean_control.clone(),
        vbar_snapshots: run.vbar_faces.clone(),
        clamp_count: run.clamp_count,
        run,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum KalmanEnsembleError {
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

/// Linear-Gaussian ensemble with Kalman–Bucy filters in the loop.
#[derive(Debug, Clone)]
pub struct KalmanEnsemble {
    pub times: Vec<f64>,
    /// Filter covariance (identical for every trajectory).
    pub v_hat: Vec<DMatrix<f64>>,
    /// Covariance of the prior advanced with `v̄(x) = Ax + 𝔼β`.
    pub prior_cov: Vec<DMatrix<f64>>,
    pub prior_mean: Vec<DVector<f64>>,
    /// Ensemble mean of the true state.
    pub mean_state: Vec<DVector<f64>>,
    pub s_rate: Vec<f64>,
    pub d_rate: Vec<f64>,
    /// `𝔼|X − X̂|²` per time.
    pub sq_error: Vec<Estimate>,
}

/// Simulates `n` trajectories of the linear model, filtering each with a
/// Kalman–Bucy filter whose mean feeds `policy` (`None` for open loop).
#[allow(clippy::too_many_arguments)]
pub fn controlled_kalman_ensemble(
    model: &LinearModel,
    policy: Option<&ControlPolicy>,
    belief0: &GaussianBelief,
    n: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<KalmanEnsemble, KalmanEnsembleError> {
    let dim = model.dim();
    let diffusion = presets::lqg(model.a.clone(), model.b.clone(), model.c.clone());
    let x0 = InitialDistribution::Gaussian { mean: belief0.mean.iter().copied().collect(), cov: belief0.cov.clone() };
    let steps = (horizon / dt).round() as usize;
    let sigma = model.sigma();

    struct Traj {
        stepper: PathStepper,
        filter: KalmanBucyFilter,
        control: Vec<f64>,
        dy: Vec<f64>,
    }
    let mut trajs = (0..n)
        .map(|k| -> Result<Traj, KalmanEnsembleError> {
            let start = x0.sample(seed, k as u64)?;
            Ok(Traj {
                stepper: PathStepper::new(&diffusion, start, seed, k as u64),
                filter: KalmanBucyFilter::new(model.clone(), belief0.clone())?,
                control: Vec::new(),
                dy: vec![0.0; model.c.nrows()],
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = KalmanEnsemble {
        times: Vec::with_capacity(steps + 1),
        v_hat: Vec::new(),
        prior_cov: Vec::new(),
        prior_mean: Vec::new(),
        mean_state: Vec::new(),
        s_rate: Vec::new(),
        d_rate: Vec::new(),
        sq_error: Vec::new(),
    };
    let mut prior_mean = belief0.mean.clone();
    let mut prior_cov = belief0.cov.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        for tr in trajs.iter_mut() {
            tr.control = match policy {
                Some(p) => {
                    let b = &tr.filter.belief;
                    let summary = PosteriorSummary {
                        mean: b.mean.iter().copied().collect(),
                        variance: b.cov.diagonal().iter().copied().collect(),
                    };
                    p.apply(t, &summary).0
                }
                None => Vec::new(),
            };
        }
        let v_hat = trajs[0].filter.belief.cov.clone();
        let rates = kb_info_rates(&prior_cov, &v_hat, &sigma, &model.c)?;
        let mut mean_state = DVector::zeros(dim);
        for tr in &trajs {
            mean_state += DVector::from_column_slice(&tr.stepper.x);
        }
        mean_state /= n as f64;
        out.times.push(t);
        out.v_hat.push(v_hat);
        out.prior_cov.push(prior_cov.clone());
        out.prior_mean.push(prior_mean.clone());
        out.mean_state.push(mean_state);
        out.s_rate.push(rates.s_rate);
        out.d_rate.push(rates.d_rate);
        out.sq_error.push(Estimate::from_samples(trajs.iter().map(|tr| {
            tr.stepper.x.iter().zip(tr.filter.belief.mean.iter()).map(|(x, m)| (x - m).powi(2)).sum::<f64>()
        })));
        if k == steps {
            break;
        }
        let mut mean_beta = DVector::zeros(dim);
        if policy.is_some() {
            for tr in &trajs {
                mean_beta += DVector::from_column_slice(&tr.control);
            }
            mean_beta /= n as f64;
        }
        prior_mean += (&model.a * &prior_mean + mean_beta) * dt;
        prior_cov = rk4_lyapunov_step(&model.a, &sigma, &prior_cov, dt);
        trajs
            .par_iter_mut()
            .map(|tr| -> Result<(), KalmanEnsembleError> {
                tr.stepper.step(&diffusion, &tr.control, dt, t, &mut tr.dy)?;
                tr.filter.step(&tr.dy, &tr.control, dt)?;
                Ok(())
            })
            .collect::<Result<Vec<()>, _>>()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_drift_examples() {
        let m = presets::lqg_scalar(-1.0, 2.0, 1.0);
        let xs = [-1.0, 0.0, 2.0];
        let open = mean_drift(&m, &[vec![0.3], vec![0.3]], &xs);
        for (x, v) in xs.iter().zip(&open) {
            assert_eq!(*v, m.drift_1d(*x, &[0.3]));
        }
        let mixed = mean_drift(&m, &[vec![0.2], vec![-0.6], vec![1.0]], &xs);
        for (x, v) in xs.iter().zip(&mixed) {
            assert!((v - (-x + 0.2)).abs() < 1e-15);
        }
        let zero = mean_drift(&m, &[vec![0.0]], &xs);
        for (x, v) in xs.iter().zip(&zero) {
            assert_eq!(*v, m.drift_1d(*x, &[]));
        }
    }
}
