use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Drift `v(x, β)`, written into the output slice.
pub type DriftFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// Diffusion factor `B(x)`, an `n × r` matrix.
pub type DiffusionFn = dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync;
/// Observation map `h(x, y)`, written into the output slice.
pub type ObservationFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension must be positive: {0}")]
    ZeroDimension(&'static str),
    #[error("domain box must have {expected} intervals with lo < hi, got {got:?}")]
    BadDomain { expected: usize, got: Vec<(f64, f64)> },
    #[error("derivative step must be positive and finite, got {0}")]
    BadStep(f64),
}

/// A diffusion `dX = v(X, β) dt + B(X) dW` observed through
/// `dY = h(X, Y) dt + dU`.
///
/// Closures are shared behind `Arc`, so cloning a model is cheap and the
/// model can be handed to many workers at once.
#[derive(Clone)]
pub struct DiffusionModel {
    name: String,
    dim_state: usize,
    dim_noise: usize,
    dim_obs: usize,
    dim_control: usize,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    observation: Arc<ObservationFn>,
    obs_depends_on_y: bool,
    constant_diffusion: bool,
    derivative_step: f64,
    domain: Vec<(f64, f64)>,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("name", &self.name)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("dim_obs", &self.dim_obs)
            .field("dim_control", &self.dim_control)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

pub struct ModelBuilder {
    name: String,
    dim_state: usize,
    dim_noise: usize,
    dim_obs: usize,
    dim_control: usize,
    drift: Option<Arc<DriftFn>>,
    diffusion: Option<Arc<DiffusionFn>>,
    observation: Option<Arc<ObservationFn>>,
    obs_depends_on_y: bool,
    constant_diffusion: bool,
    derivative_step: Option<f64>,
    domain: Option<Vec<(f64, f64)>>,
}

impl ModelBuilder {
    pub fn drift<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
    {
        self.diffusion = Some(Arc::new(f));
        self
    }

    /// Observation map depending on the state only.
    pub fn observation<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.observation = Some(Arc::new(move |x: &[f64], _y: &[f64], out: &mut [f64]| f(x, out)));
        self.obs_depends_on_y = false;
        self
    }

    /// Observation map `h(x, y)` that also reads the current observation.
    pub fn observation_with_y<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.observation = Some(Arc::new(f));
        self.obs_depends_on_y = true;
        self
    }

    pub fn control_dim(mut self, m: usize) -> Self {
        self.dim_control = m;
        self
    }

    /// Marks `B` as state independent, so `∂Σ = 0` is used exactly.
    pub fn constant_diffusion(mut self, yes: bool) -> Self {
        self.constant_diffusion = yes;
        self
    }

    pub fn derivative_step(mut self, h: f64) -> Self {
        self.derivative_step = Some(h);
        self
    }

    pub fn domain(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.domain = Some(bounds);
        self
    }

    pub fn build(self) -> Result<DiffusionModel, ModelError> {
        if self.dim_state == 0 {
            return Err(ModelError::ZeroDimension("state"));
        }
        if self.dim_noise == 0 {
            return Err(ModelError::ZeroDimension("noise"));
        }
        if self.dim_obs == 0 {
            return Err(ModelError::ZeroDimension("observation"));
        }
        let n = self.dim_state;
        let domain = self.domain.unwrap_or_else(|| vec![(-10.0, 10.0); n]);
        if domain.len() != n || domain.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(ModelError::BadDomain { expected: n, got: domain });
        }
        let width = domain.iter().map(|&(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min);
        let derivative_step = self.derivative_step.unwrap_or(1e-5 * width);
        if !(derivative_step > 0.0 && derivative_step.is_finite()) {
            return Err(ModelError::BadStep(derivative_step));
        }
        let zero_drift: Arc<DriftFn> = Arc::new(|_x: &[f64], _b: &[f64], out: &mut [f64]| out.fill(0.0));
        let zero_diffusion: Arc<DiffusionFn> = Arc::new(|_x: &[f64], out: &mut DMatrix<f64>| out.fill(0.0));
        let zero_obs: Arc<ObservationFn> = Arc::new(|_x: &[f64], _y: &[f64], out: &mut [f64]| out.fill(0.0));
        let constant_diffusion = self.constant_diffusion || self.diffusion.is_none();
        Ok(DiffusionModel {
            name: self.name,
            dim_state: n,
            dim_noise: self.dim_noise,
            dim_obs: self.dim_obs,
            dim_control: self.dim_control,
            drift: self.drift.unwrap_or(zero_drift),
            diffusion: self.diffusion.unwrap_or(zero_diffusion),
            observation: self.observation.unwrap_or(zero_obs),
            obs_depends_on_y: self.obs_depends_on_y,
            constant_diffusion,
            derivative_step,
            domain,
        })
    }
}

impl DiffusionModel {
    /// Starts a model with state dimension `n`, noise dimension `r` and
    /// observation dimension `p`. Unset fields default to zero.
    pub fn builder(name: impl Into<String>, n: usize, r: usize, p: usize) -> ModelBuilder {
        ModelBuilder {
            name: name.into(),
            dim_state: n,
            dim_noise: r,
            dim_obs: p,
            dim_control: 0,
            drift: None,
            diffusion: None,
            observation: None,
            obs_depends_on_y: false,
            constant_diffusion: false,
            derivative_step: None,
            domain: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim_state(&self) -> usize {
        self.dim_state
    }
    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }
    pub fn dim_obs(&self) -> usize {
        self.dim_obs
    }
    pub fn dim_control(&self) -> usize {
        self.dim_control
    }
    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }
    pub fn derivative_step(&self) -> f64 {
        self.derivative_step
    }
    pub fn has_constant_diffusion(&self) -> bool {
        self.constant_diffusion
    }
    pub fn observation_depends_on_y(&self) -> bool {
        self.obs_depends_on_y
    }

    pub fn with_domain(mut self, bounds: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if bounds.len() != self.dim_state || bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(ModelError::BadDomain { expected: self.dim_state, got: bounds });
        }
        self.domain = bounds;
        Ok(self)
    }

    pub fn with_derivative_step(mut self, h: f64) -> Result<Self, ModelError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ModelError::BadStep(h));
        }
        self.derivative_step = h;
        Ok(self)
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], control: &[f64], out: &mut [f64]) {
        (self.drift)(x, control, out)
    }

    pub fn drift(&self, x: &[f64], control: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim_state);
        (self.drift)(x, control, out.as_mut_slice());
        out
    }

    /// Scalar drift of a 1D model.
    #[inline]
    pub fn drift_1d(&self, x: f64, control: &[f64]) -> f64 {
        let mut out = [0.0];
        (self.drift)(&[x], control, &mut out);
        out[0]
    }

    pub fn diffusion_factor(&self, x: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim_state, self.dim_noise);
        (self.diffusion)(x, &mut b);
        b
    }

    pub fn diffusion_factor_into(&self, x: &[f64], out: &mut DMatrix<f64>) {
        (self.diffusion)(x, out)
    }

    #[inline]
    pub fn observe_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.observation)(x, y, out)
    }

    pub fn observe(&self, x: &[f64], y: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim_obs);
        (self.observation)(x, y, out.as_mut_slice());
        out
    }

    /// `Σ(x) = B(x) B(x)ᵀ`.
    pub fn sigma(&self, x: &[f64]) -> DMatrix<f64> {
        let b = self.diffusion_factor(x);
        &b * b.transpose()
    }

    /// `Σ(x)` of a 1D model.
    pub fn sigma_1d(&self, x: f64) -> f64 {
        let b = self.diffusion_factor(&[x]);
        b.row(0).iter().map(|v| v * v).sum()
    }

    /// True when `x` lies outside the domain box inflated tenfold about its
    /// centre, or is not finite.
    pub fn is_blown_up(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.domain).any(|(&xi, &(lo, hi))| {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            !xi.is_finite() || (xi - mid).abs() > 10.0 * half
        })
    }
}
