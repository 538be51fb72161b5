use nalgebra::{DMatrix, DVector};

use super::{
    is_hurwitz, lyapunov_steady, spd_eigen, spd_inverse, spd_log_det, symmetrize, GaussianBelief, GaussianError,
    LinearModel,
};
use crate::diffusion::JointPath;

/// `dV̂/dt = A V̂ + V̂ Aᵀ + Σ − V̂ Cᵀ C V̂`.
pub fn riccati_rhs(a: &DMatrix<f64>, sigma: &DMatrix<f64>, c: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let vc = v * c.transpose();
    a * v + v * a.transpose() + sigma - &vc * vc.transpose()
}

pub fn riccati_step(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    c: &DMatrix<f64>,
    v: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    let k1 = riccati_rhs(a, sigma, c, v);
    let k2 = riccati_rhs(a, sigma, c, &(v + &k1 * (0.5 * h)));
    let k3 = riccati_rhs(a, sigma, c, &(v + &k2 * (0.5 * h)));
    let k4 = riccati_rhs(a, sigma, c, &(v + &k3 * h));
    let mut out = v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    symmetrize(&mut out);
    out
}

/// Stabilising solution of the filter algebraic Riccati equation by
/// Newton–Kleinman iteration.
pub fn riccati_steady(a: &DMatrix<f64>, sigma: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let n = a.nrows();
    let ctc = c.transpose() * c;
    let mut p = if is_hurwitz(a) {
        DMatrix::zeros(n, n)
    } else {
        // Integrate the Riccati flow until the closed loop is stable.
        let mut v = DMatrix::identity(n, n);
        let mut t = 0.0;
        while !is_hurwitz(&(a - &v * &ctc)) {
            for _ in 0..1000 {
                v = riccati_step(a, sigma, c, &v, 1e-3);
            }
            t += 1.0;
            if t > 1e3 || v.iter().any(|x| !x.is_finite()) {
                return Err(GaussianError::NoConvergence("riccati warm start"));
            }
        }
        v
    };
    for _ in 0..100 {
        let closed = a - &p * &ctc;
        let q = sigma + &p * &ctc * &p;
        let next = lyapunov_steady(&closed, &q)?;
        let change = (&next - &p).amax();
        p = next;
        if change <= 1e-15 * p.amax().max(1.0) {
            break;
        }
    }
    let residual = riccati_rhs(a, sigma, c, &p).amax();
    if residual > 1e-9 * p.amax().max(1.0) {
        return Err(GaussianError::NoConvergence("newton-kleinman"));
    }
    Ok(p)
}

/// Closed-form information rates of the linear filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbRates {
    pub s_rate: f64,
    pub d_rate: f64,
    pub i_rate: f64,
    pub i_closed: f64,
}

/// `Ṡ = ½ tr C V̂ Cᵀ`, `Ḋ = ½ tr Σ(V̂⁻¹ − V⁻¹)`, `İ = Ṡ − Ḋ`, and the
/// Gaussian mutual information `½ ln |V| / |V̂|`.
pub fn kb_info_rates(
    v: &DMatrix<f64>,
    v_hat: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<KbRates, GaussianError> {
    let s_rate = 0.5 * (c * v_hat * c.transpose()).trace();
    let d_rate = 0.5 * (sigma * (spd_inverse(v_hat)? - spd_inverse(v)?)).trace();
    let i_closed = 0.5 * (spd_log_det(v)? - spd_log_det(v_hat)?);
    Ok(KbRates { s_rate, d_rate, i_rate: s_rate - d_rate, i_closed })
}

/// Step-by-step Kalman–Bucy filter.
///
/// The covariance follows the Riccati ODE by RK4; the mean is updated with
/// an Euler step driven by the observation increment.
#[derive(Debug, Clone)]
pub struct KalmanBucyFilter {
    model: LinearModel,
    sigma: DMatrix<f64>,
    pub belief: GaussianBelief,
    pub t: f64,
}

impl KalmanBucyFilter {
    pub fn new(model: LinearModel, belief0: GaussianBelief) -> Result<Self, GaussianError> {
        if belief0.dim() != model.dim() {
            return Err(GaussianError::Dimension("initial belief does not match the model".into()));
        }
        let sigma = model.sigma();
        Ok(Self { model, sigma, belief: belief0, t: 0.0 })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    /// Consumes `ΔY` over `[t, t + dt]` and returns the innovation
    /// `ΔI = ΔY − C X̂ dt`. `control` is added to the mean drift when
    /// non-empty.
    pub fn step(&mut self, dy: &[f64], control: &[f64], dt: f64) -> Result<DVector<f64>, GaussianError> {
        let LinearModel { a, c, .. } = &self.model;
        let x = &self.belief.mean;
        let innovation = DVector::from_column_slice(dy) - c * x * dt;
        let gain = &self.belief.cov * c.transpose();
        let mut next = x + a * x * dt + &gain * &innovation;
        for (m, b) in next.iter_mut().zip(control) {
            *m += b * dt;
        }
        let cov = riccati_step(a, &self.sigma, c, &self.belief.cov, dt);
        self.t += dt;
        if cov.iter().chain(next.iter()).any(|v| !v.is_finite()) {
            return Err(GaussianError::NonFinite(self.t));
        }
        if spd_eigen(&cov).is_err() {
            return Err(GaussianError::LostDefiniteness(self.t));
        }
        self.belief = GaussianBelief { mean: next, cov };
        Ok(innovation)
    }
}

/// Filter output along a path: `beliefs[k]` is the belief at `times[k]`.
#[derive(Debug, Clone)]
pub struct KalmanRun {
    pub times: Vec<f64>,
    pub beliefs: Vec<GaussianBelief>,
    pub innovations: Vec<DVector<f64>>,
}

pub fn kalman_bucy_run(
    model: &LinearModel,
    path: &JointPath,
    belief0: &GaussianBelief,
) -> Result<KalmanRun, GaussianError> {
    let mut filter = KalmanBucyFilter::new(model.clone(), belief0.clone())?;
    let mut run =
        KalmanRun { times: vec![0.0], beliefs: vec![belief0.clone()], innovations: Vec::with_capacity(path.n_steps()) };
    for (k, dy) in path.obs_increments.iter().enumerate() {
        run.innovations.push(filter.step(dy, &[], path.dt)?);
        run.times.push(path.times[k + 1]);
        run.beliefs.push(filter.belief.clone());
    }
    Ok(run)
}
