use nalgebra::DMatrix;

use super::{symmetrize, GaussianBelief, GaussianError};

/// Largest real part of the spectrum of `a`.
fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < 0.0
}

/// Solves `A V + V Aᵀ + Σ = 0` for Hurwitz `A`.
///
/// Uses a Cayley transform to a discrete Stein equation followed by the
/// squared Smith iteration.
pub fn lyapunov_steady(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let n = a.nrows();
    if !a.is_square() || sigma.shape() != (n, n) {
        return Err(GaussianError::Dimension(format!("A {:?}, Σ {:?}", a.shape(), sigma.shape())));
    }
    let abscissa = spectral_abscissa(a);
    if !(abscissa < 0.0) {
        return Err(GaussianError::NotHurwitz(abscissa));
    }
    let eigs = a.complex_eigenvalues();
    let p = eigs.iter().map(|z| z.norm()).sum::<f64>() / n as f64;
    let id = DMatrix::<f64>::identity(n, n);
    let shifted_inv = (a - &id * p).try_inverse().ok_or(GaussianError::NoConvergence("lyapunov shift"))?;
    let mut u = &shifted_inv * (a + &id * p);
    let mut x = &shifted_inv * sigma * shifted_inv.transpose() * (2.0 * p);
    for _ in 0..200 {
        let ux = &u * &x * u.transpose();
        let done = ux.amax() <= 1e-17 * x.amax();
        x += ux;
        u = &u * &u;
        if done || u.amax() < 1e-300 {
            symmetrize(&mut x);
            return Ok(x);
        }
    }
    Err(GaussianError::NoConvergence("lyapunov smith iteration"))
}

/// `dV/dt = A V + V Aᵀ + Σ`.
pub fn lyapunov_rhs(a: &DMatrix<f64>, sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    a * v + v * a.transpose() + sigma
}

/// One classical RK4 step of the Lyapunov ODE.
pub fn rk4_lyapunov_step(a: &DMatrix<f64>, sigma: &DMatrix<f64>, v: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let k1 = lyapunov_rhs(a, sigma, v);
    let k2 = lyapunov_rhs(a, sigma, &(v + &k1 * (0.5 * h)));
    let k3 = lyapunov_rhs(a, sigma, &(v + &k2 * (0.5 * h)));
    let k4 = lyapunov_rhs(a, sigma, &(v + &k3 * h));
    let mut out = v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    symmetrize(&mut out);
    out
}

/// Propagates mean (`dμ/dt = Aμ`) and covariance to time `t` with RK4
/// steps no longer than `dt`.
pub fn propagate_gaussian(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    belief0: &GaussianBelief,
    t: f64,
    dt: f64,
) -> Result<GaussianBelief, GaussianError> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(GaussianError::Dimension(format!("need t ≥ 0 and dt > 0, got t={t}, dt={dt}")));
    }
    let steps = (t / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(belief0.clone());
    }
    let h = t / steps as f64;
    let mut mean = belief0.mean.clone();
    let mut cov = belief0.cov.clone();
    for k in 0..steps {
        cov = rk4_lyapunov_step(a, sigma, &cov, h);
        let k1 = a * &mean;
        let k2 = a * (&mean + &k1 * (0.5 * h));
        let k3 = a * (&mean + &k2 * (0.5 * h));
        let k4 = a * (&mean + &k3 * h);
        mean += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if cov.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(GaussianError::NonFinite((k + 1) as f64 * h));
        }
    }
    Ok(GaussianBelief { mean, cov })
}
