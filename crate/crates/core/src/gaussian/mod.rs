//! Exact linear-Gaussian stack.

mod kalman;
mod ledger;
mod lyapunov;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use kalman::{
    kalman_bucy_run, kb_info_rates, riccati_rhs, riccati_steady, riccati_step, KalmanBucyFilter, KalmanRun, KbRates,
};
pub use ledger::{surprise_ledger, SurpriseLedgerPoint};
pub use lyapunov::{is_hurwitz, lyapunov_rhs, lyapunov_steady, propagate_gaussian, rk4_lyapunov_step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("no steady state: drift matrix is not Hurwitz (max real eigenvalue part {0})")]
    NotHurwitz(f64),
    #[error("matrix is singular or indefinite: eigenvalues in [{min}, {max}]")]
    Singular { min: f64, max: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("integration produced non-finite values at t={0}")]
    NonFinite(f64),
    #[error("filter covariance lost positive-definiteness at t={0}")]
    LostDefiniteness(f64),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}

/// `dX = A X dt + B dW`, `dY = C X dt + dU`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, GaussianError> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n {
            return Err(GaussianError::Dimension(format!(
                "A is {}x{}, B is {}x{}, C is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Scalar model with diffusion tensor `Σ = sigma`.
    pub fn scalar(a: f64, sigma: f64, c: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, sigma.sqrt()),
            c: DMatrix::from_element(1, 1, c),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        &self.b * self.b.transpose()
    }
}

/// Mean and covariance of a Gaussian law.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn scalar(mean: f64, var: f64) -> Self {
        Self { mean: DVector::from_element(1, mean), cov: DMatrix::from_element(1, 1, var) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Eigen-decomposition of a symmetric positive-definite matrix, rejecting
/// `λ_min < 1e−12·λ_max`.
pub(crate) fn spd_eigen(m: &DMatrix<f64>) -> Result<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, GaussianError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || !(min >= 1e-12 * max) {
        return Err(GaussianError::Singular { min, max });
    }
    Ok(eig)
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let eig = spd_eigen(m)?;
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(&eig.eigenvectors * inv * eig.eigenvectors.transpose())
}

pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64, GaussianError> {
    Ok(spd_eigen(m)?.eigenvalues.iter().map(|l| l.ln()).sum())
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}
