use super::{Grid1D, GridDensity, GridError};
use crate::diffusion::DiffusionModel;

/// Relative size of negative values that are treated as rounding noise.
const NEGATIVITY_TOL: f64 = 1e-14;
const CFL_SAFETY: f64 = 0.9;

/// Discrete Fokker–Planck operator `ρ ↦ −∂ₓJ` with
/// `J = vρ − ½∂ₓ(Σρ)` and zero flux through the two boundary faces.
///
/// Drift lives on faces, `Σ` on centres; the face flux is
/// `J_{i+½} = v_{i+½}(ρ_i + ρ_{i+1})/2 − (Σ_{i+1}ρ_{i+1} − Σ_iρ_i)/(2dx)`.
#[derive(Debug, Clone)]
pub struct FpOperator {
    grid: Grid1D,
    face_drift: Vec<f64>,
    sigma: Vec<f64>,
    stable_dt: f64,
}

/// Reusable buffers for [`FpOperator::heun_step`].
#[derive(Debug, Clone, Default)]
pub struct FpScratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    stage: Vec<f64>,
}

impl FpOperator {
    /// Builds the operator for a 1D model under a fixed control.
    pub fn from_model(model: &DiffusionModel, grid: Grid1D, control: &[f64]) -> Result<Self, GridError> {
        if model.dim_state() != 1 {
            return Err(GridError::NotOneDimensional(model.dim_state()));
        }
        let face_drift = (0..=grid.n_cells()).map(|i| model.drift_1d(grid.face(i), control)).collect();
        let sigma = (0..grid.n_cells()).map(|i| model.sigma_1d(grid.center(i))).collect();
        Ok(Self::from_parts(grid, face_drift, sigma))
    }

    /// Operator from explicit face drifts (`n_cells + 1`) and centre values
    /// of `Σ` (`n_cells`).
    pub fn from_parts(grid: Grid1D, face_drift: Vec<f64>, sigma: Vec<f64>) -> Self {
        assert_eq!(face_drift.len(), grid.n_cells() + 1);
        assert_eq!(sigma.len(), grid.n_cells());
        let dx = grid.dx();
        let mut rate: f64 = 0.0;
        for i in 0..grid.n_cells() {
            let dv = (face_drift[i + 1] - face_drift[i]).abs();
            rate = rate.max(sigma[i] / (dx * dx) + dv / (2.0 * dx));
        }
        let stable_dt = if rate > 0.0 { CFL_SAFETY / rate } else { f64::INFINITY };
        Self { grid, face_drift, sigma, stable_dt }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }
    pub fn face_drift(&self) -> &[f64] {
        &self.face_drift
    }
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Largest step for which one Heun step keeps the density non-negative.
    pub fn stable_dt(&self) -> f64 {
        self.stable_dt
    }

    /// Face fluxes `J_{i+½}`, `i = 0..n`, with the two boundary fluxes zero.
    pub fn fluxes(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        let half_inv_dx = 0.5 / self.grid.dx();
        let mut j = vec![0.0; n + 1];
        for i in 0..n - 1 {
            j[i + 1] = 0.5 * self.face_drift[i + 1] * (rho[i] + rho[i + 1])
                - (self.sigma[i + 1] * rho[i + 1] - self.sigma[i] * rho[i]) * half_inv_dx;
        }
        j
    }

    /// `out = −∂ₓJ(ρ)`.
    pub fn apply(&self, rho: &[f64], out: &mut [f64]) {
        let n = rho.len();
        let inv_dx = 1.0 / self.grid.dx();
        let half_inv_dx = 0.5 * inv_dx;
        let mut j_left = 0.0;
        for i in 0..n {
            let j_right = if i + 1 < n {
                0.5 * self.face_drift[i + 1] * (rho[i] + rho[i + 1])
                    - (self.sigma[i + 1] * rho[i + 1] - self.sigma[i] * rho[i]) * half_inv_dx
            } else {
                0.0
            };
            out[i] = -(j_right - j_left) * inv_dx;
            j_left = j_right;
        }
    }

    /// One Heun (SSP-RK2) step in place. Does not check the step size.
    pub fn heun_step(&self, rho: &mut [f64], dt: f64, scratch: &mut FpScratch) -> Result<(), GridError> {
        let n = rho.len();
        scratch.k1.resize(n, 0.0);
        scratch.k2.resize(n, 0.0);
        scratch.stage.resize(n, 0.0);
        self.apply(rho, &mut scratch.k1);
        for i in 0..n {
            scratch.stage[i] = rho[i] + dt * scratch.k1[i];
        }
        self.apply(&scratch.stage, &mut scratch.k2);
        for i in 0..n {
            rho[i] += 0.5 * dt * (scratch.k1[i] + scratch.k2[i]);
        }
        clip_negatives(rho)
    }

    /// Advances by `t` using the fewest equal Heun substeps that respect
    /// [`stable_dt`](Self::stable_dt).
    pub fn advance(&self, rho: &mut [f64], t: f64, scratch: &mut FpScratch) -> Result<(), GridError> {
        if t == 0.0 {
            return Ok(());
        }
        let substeps = (t / self.stable_dt).ceil().max(1.0) as usize;
        let h = t / substeps as f64;
        for _ in 0..substeps {
            self.heun_step(rho, h, scratch)?;
        }
        Ok(())
    }
}

fn clip_negatives(rho: &mut [f64]) -> Result<(), GridError> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in rho.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return Err(GridError::UnstableStep { min, max });
    }
    if min < 0.0 {
        if min < -NEGATIVITY_TOL * max.abs() {
            return Err(GridError::UnstableStep { min, max });
        }
        for v in rho.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(())
}

/// One Fokker–Planck step of size `dt` under the uncontrolled drift.
/// Fails before stepping when `dt` exceeds the stability limit.
pub fn fp_step(model: &DiffusionModel, rho: &GridDensity, dt: f64) -> Result<GridDensity, GridError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GridError::BadStep(dt));
    }
    let op = FpOperator::from_model(model, rho.grid, &[])?;
    if dt > op.stable_dt() {
        return Err(GridError::Cfl { dt, limit: op.stable_dt() });
    }
    let mut out = rho.clone();
    op.heun_step(&mut out.values, dt, &mut FpScratch::default())?;
    Ok(out)
}

/// Advances `rho` by time `t` with automatic substepping.
pub fn fp_advance(op: &FpOperator, rho: &GridDensity, t: f64) -> Result<GridDensity, GridError> {
    if op.grid() != rho.grid {
        return Err(GridError::GridMismatch);
    }
    let mut out = rho.clone();
    op.advance(&mut out.values, t, &mut FpScratch::default())?;
    Ok(out)
}

/// Zero-flux stationary density of the discrete operator.
///
/// In 1D the discrete flux vanishes iff
/// `ρ_{i+1}(Σ_{i+1} − v dx) = ρ_i(Σ_i + v dx)` at every interior face, which
/// is solved directly in the log domain. When a ratio is not positive the
/// density is found by time-stepping instead.
pub fn steady_state_grid(model: &DiffusionModel, grid: Grid1D) -> Result<GridDensity, GridError> {
    let op = FpOperator::from_model(model, grid, &[])?;
    let dx = grid.dx();
    let n = grid.n_cells();
    let mut logs = vec![0.0; n];
    for i in 0..n - 1 {
        let v = op.face_drift[i + 1];
        let up = op.sigma[i] + v * dx;
        let down = op.sigma[i + 1] - v * dx;
        if !(up > 0.0 && down > 0.0) {
            return steady_state_iterate(&op, 1e4);
        }
        logs[i + 1] = logs[i] + up.ln() - down.ln();
    }
    Ok(GridDensity::from_log_values(grid, &logs))
}

/// Runs the Fokker–Planck flow from the uniform density until the sup-norm
/// change per unit time falls below `1e−10`.
pub fn steady_state_iterate(op: &FpOperator, max_time: f64) -> Result<GridDensity, GridError> {
    let grid = op.grid();
    let mut rho = GridDensity::from_fn(grid, |_| 1.0);
    let mut scratch = FpScratch::default();
    let chunk = 1.0_f64.min(max_time);
    let mut t = 0.0;
    while t < max_time {
        let before = rho.values.clone();
        op.advance(&mut rho.values, chunk, &mut scratch)?;
        t += chunk;
        let change = rho.values.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change / chunk < 1e-10 {
            return Ok(rho);
        }
    }
    Err(GridError::NoConvergence(max_time))
}
