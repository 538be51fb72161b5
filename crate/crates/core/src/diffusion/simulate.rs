//! Euler–Maruyama simulation of the coupled state/observation system.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::DiffusionModel;
use crate::rng::{standard_normal, substream, Channel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("horizon {horizon} shorter than one step {dt}")]
    ShortHorizon { horizon: f64, dt: f64 },
    #[error("initial distribution has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial covariance is not positive semi-definite")]
    BadCovariance,
    #[error("trajectory {trajectory} blew up at t={time}: state {state:?}")]
    BlowUp { trajectory: u64, time: f64, state: Vec<f64> },
}

/// Law of `X(0)`. Always drawn independently of the observation noise.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    Point(Vec<f64>),
    Gaussian { mean: Vec<f64>, cov: DMatrix<f64> },
}

impl InitialDistribution {
    pub fn scalar_gaussian(mean: f64, var: f64) -> Self {
        InitialDistribution::Gaussian { mean: vec![mean], cov: DMatrix::from_element(1, 1, var) }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialDistribution::Point(x) => x.len(),
            InitialDistribution::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Draws from the `Initial` channel of `(seed, trajectory)`.
    pub fn sample(&self, seed: u64, trajectory: u64) -> Result<Vec<f64>, SimulationError> {
        match self {
            InitialDistribution::Point(x) => Ok(x.clone()),
            InitialDistribution::Gaussian { mean, cov } => {
                let n = mean.len();
                if cov.nrows() != n || cov.ncols() != n {
                    return Err(SimulationError::BadCovariance);
                }
                let mut rng = substream(seed, trajectory, Channel::Initial);
                let z = DVector::from_fn(n, |_, _| standard_normal(&mut rng));
                // Symmetric square root tolerates singular covariances.
                let eig = cov.clone().symmetric_eigen();
                if eig.eigenvalues.iter().any(|&l| l < -1e-12 * eig.eigenvalues.amax().max(1.0)) {
                    return Err(SimulationError::BadCovariance);
                }
                let root = &eig.eigenvectors
                    * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
                    * eig.eigenvectors.transpose();
                let dx = root * z;
                Ok(mean.iter().zip(dx.iter()).map(|(m, d)| m + d).collect())
            }
        }
    }
}

/// Single-trajectory Euler–Maruyama stepper.
///
/// One step uses `ΔY = h(X_k, Y_k) dt + ΔU` and
/// `X_{k+1} = X_k + v(X_k, β) dt + B(X_k) ΔW`.
pub struct PathStepper {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    trajectory: u64,
    w_rng: ChaCha20Rng,
    u_rng: ChaCha20Rng,
    drift: Vec<f64>,
    h: Vec<f64>,
    dw: Vec<f64>,
    b: DMatrix<f64>,
}

impl PathStepper {
    pub fn new(model: &DiffusionModel, x0: Vec<f64>, seed: u64, trajectory: u64) -> Self {
        let n = model.dim_state();
        Self {
            x: x0,
            y: vec![0.0; model.dim_obs()],
            trajectory,
            w_rng: substream(seed, trajectory, Channel::State),
            u_rng: substream(seed, trajectory, Channel::Observation),
            drift: vec![0.0; n],
            h: vec![0.0; model.dim_obs()],
            dw: vec![0.0; model.dim_noise()],
            b: DMatrix::zeros(n, model.dim_noise()),
        }
    }

    /// Advances one step and writes the observation increment into `dy`.
    /// `t` is the time at the start of the step (used for diagnostics).
    pub fn step(
        &mut self,
        model: &DiffusionModel,
        control: &[f64],
        dt: f64,
        t: f64,
        dy: &mut [f64],
    ) -> Result<(), SimulationError> {
        let sdt = dt.sqrt();
        model.observe_into(&self.x, &self.y, &mut self.h);
        for (i, d) in dy.iter_mut().enumerate() {
            let next = self.y[i] + self.h[i] * dt + sdt * standard_normal(&mut self.u_rng);
            // Stored so that ΔY is exactly the difference of stored Y values.
            *d = next - self.y[i];
            self.y[i] = next;
        }
        model.drift_into(&self.x, control, &mut self.drift);
        model.diffusion_factor_into(&self.x, &mut self.b);
        for w in self.dw.iter_mut() {
            *w = sdt * standard_normal(&mut self.w_rng);
        }
        for i in 0..self.x.len() {
            let mut inc = self.drift[i] * dt;
            for (j, w) in self.dw.iter().enumerate() {
                inc += self.b[(i, j)] * w;
            }
            self.x[i] += inc;
        }
        if model.is_blown_up(&self.x) {
            return Err(SimulationError::BlowUp { trajectory: self.trajectory, time: t + dt, state: self.x.clone() });
        }
        Ok(())
    }
}

/// A sampled trajectory of `(X, Y)` on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    /// `obs_increments[k] = observations[k + 1] − observations[k]`.
    pub obs_increments: Vec<Vec<f64>>,
    pub seed: u64,
    pub trajectory_index: u64,
}

impl JointPath {
    pub fn n_steps(&self) -> usize {
        self.obs_increments.len()
    }
}

pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize, SimulationError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimulationError::BadStep(dt));
    }
    if !(horizon >= dt) {
        return Err(SimulationError::ShortHorizon { horizon, dt });
    }
    Ok((horizon / dt).round() as usize)
}

/// Simulates one uncontrolled trajectory on `[0, horizon]`.
pub fn simulate_joint(
    model: &DiffusionModel,
    x0: &InitialDistribution,
    horizon: f64,
    dt: f64,
    seed: u64,
    trajectory_index: u64,
) -> Result<JointPath, SimulationError> {
    let steps = step_count(horizon, dt)?;
    if x0.dim() != model.dim_state() {
        return Err(SimulationError::DimensionMismatch { expected: model.dim_state(), got: x0.dim() });
    }
    let start = x0.sample(seed, trajectory_index)?;
    let mut stepper = PathStepper::new(model, start, seed, trajectory_index);
    let mut path = JointPath {
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        observations: Vec::with_capacity(steps + 1),
        obs_increments: Vec::with_capacity(steps),
        seed,
        trajectory_index,
    };
    path.times.push(0.0);
    path.states.push(stepper.x.clone());
    path.observations.push(stepper.y.clone());
    let mut dy = vec![0.0; model.dim_obs()];
    for k in 0..steps {
        let t = k as f64 * dt;
        stepper.step(model, &[], dt, t, &mut dy)?;
        path.times.push((k + 1) as f64 * dt);
        path.states.push(stepper.x.clone());
        path.observations.push(stepper.y.clone());
        path.obs_increments.push(dy.clone());
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::presets;

    #[test]
    fn degenerate_dynamics_keep_state() {
        let m = DiffusionModel::builder("still", 1, 1, 1).build().unwrap();
        let p = simulate_joint(&m, &InitialDistribution::Point(vec![0.7]), 1.0, 0.01, 3, 0).unwrap();
        assert!(p.states.iter().all(|x| x[0] == 0.7));
        let qv: f64 = p.obs_increments.iter().map(|d| d[0] * d[0]).sum();
        assert!((qv - 1.0).abs() < 0.5, "quadratic variation {qv}");
        for k in 0..p.n_steps() {
            assert_eq!(p.obs_increments[k][0], p.observations[k + 1][0] - p.observations[k][0]);
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let m = presets::double_well(1.0, 0.5, 1.0);
        let x0 = InitialDistribution::scalar_gaussian(0.0, 0.25);
        let a = simulate_joint(&m, &x0, 0.5, 1e-3, 11, 5).unwrap();
        let b = simulate_joint(&m, &x0, 0.5, 1e-3, 11, 5).unwrap();
        let c = simulate_joint(&m, &x0, 0.5, 1e-3, 11, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn blow_up_is_reported() {
        let m = DiffusionModel::builder("explode", 1, 1, 1)
            .drift(|x, _b, out| out[0] = x[0] * x[0])
            .domain(vec![(-1.0, 1.0)])
            .build()
            .unwrap();
        let err = simulate_joint(&m, &InitialDistribution::Point(vec![1.0]), 5.0, 0.01, 0, 0).unwrap_err();
        assert!(matches!(err, SimulationError::BlowUp { .. }));
    }
}
