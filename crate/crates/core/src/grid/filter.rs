use super::{FpOperator, FpScratch, GridDensity, GridError};
use crate::diffusion::DiffusionModel;

/// exp() overflows just above 709.
const MAX_EXPONENT: f64 = 700.0;

/// Observation map at every cell centre, flattened as `[cell · p + k]`.
pub fn observation_table(model: &DiffusionModel, zeta: &GridDensity, y: &[f64]) -> Vec<f64> {
    let p = model.dim_obs();
    let mut table = vec![0.0; zeta.grid.n_cells() * p];
    for (i, chunk) in table.chunks_mut(p).enumerate() {
        model.observe_into(&[zeta.grid.center(i)], y, chunk);
    }
    table
}

/// `ζ_i ← ζ_i · exp(h_iᵀΔY − ½|h_i|² dt)` with `h` tabulated per cell.
pub fn apply_likelihood(values: &mut [f64], h: &[f64], dy: &[f64], dt: f64) -> Result<(), GridError> {
    let p = dy.len();
    let mut max_exponent = f64::NEG_INFINITY;
    let mut max_h_dy: f64 = 0.0;
    for (v, hi) in values.iter_mut().zip(h.chunks(p)) {
        let mut h_dy = 0.0;
        let mut h2 = 0.0;
        for k in 0..p {
            h_dy += hi[k] * dy[k];
            h2 += hi[k] * hi[k];
        }
        let e = h_dy - 0.5 * h2 * dt;
        max_exponent = max_exponent.max(e);
        max_h_dy = max_h_dy.max(h_dy.abs());
        *v *= e.exp();
    }
    if !(max_exponent <= MAX_EXPONENT) {
        return Err(GridError::ExponentOverflow { max_exponent, max_h_dy });
    }
    Ok(())
}

/// Zakai step on raw cell values followed by renormalisation; returns the
/// log of the mass removed. `h` is the tabulated observation map.
pub fn zakai_step_normalized(
    op: &FpOperator,
    h: &[f64],
    values: &mut [f64],
    delta_y: &[f64],
    dt: f64,
    scratch: &mut FpScratch,
) -> Result<f64, GridError> {
    op.advance(values, 0.5 * dt, scratch)?;
    apply_likelihood(values, h, delta_y, dt)?;
    op.advance(values, 0.5 * dt, scratch)?;
    let mass = values.iter().sum::<f64>() * op.grid().dx();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(GridError::FilterCollapse(mass));
    }
    let inv = 1.0 / mass;
    for v in values.iter_mut() {
        *v *= inv;
    }
    Ok(mass.ln())
}

/// One Strang-split step of the (possibly controlled) Zakai equation:
/// half Fokker–Planck step, likelihood multiplication, half step.
///
/// `y` is the observation value at the start of the step, used only when
/// the observation map depends on it.
pub fn zakai_step(
    model: &DiffusionModel,
    zeta: &GridDensity,
    delta_y: &[f64],
    y: &[f64],
    dt: f64,
    control: Option<&[f64]>,
) -> Result<GridDensity, GridError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GridError::BadStep(dt));
    }
    let op = FpOperator::from_model(model, zeta.grid, control.unwrap_or(&[]))?;
    let h = observation_table(model, zeta, y);
    let mut out = zeta.clone();
    let mut scratch = FpScratch::default();
    op.advance(&mut out.values, 0.5 * dt, &mut scratch)?;
    apply_likelihood(&mut out.values, &h, delta_y, dt)?;
    op.advance(&mut out.values, 0.5 * dt, &mut scratch)?;
    out.normalized = false;
    Ok(out)
}

/// Rescales to unit mass and folds `ln mass` into `log_norm`.
///
/// The returned density represents the same unnormalised function
/// `values · exp(log_norm)`.
pub fn normalize(zeta: &GridDensity) -> Result<(GridDensity, f64), GridError> {
    if zeta.normalized {
        return Ok((zeta.clone(), 0.0));
    }
    let mass = zeta.mass();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(GridError::FilterCollapse(mass));
    }
    let mut out = zeta.clone();
    for v in &mut out.values {
        *v /= mass;
    }
    let log_mass = mass.ln();
    out.normalized = true;
    out.log_norm += log_mass;
    Ok((out, log_mass))
}

/// One Strang-split step of the Kushner–Stratonovich equation for a
/// normalised density, driven by the innovation `ΔI = ΔY − π(h) dt`.
///
/// The innovation update keeps the Itô second-order term:
/// `ρ ← ρ[1 + ε ΔI + ½(ε² − Var h)(ΔI² − dt)]`, `ε = h − π(h)`
/// (scalar observations).
pub fn ks_step(
    model: &DiffusionModel,
    rho_hat: &GridDensity,
    delta_y: f64,
    y: &[f64],
    dt: f64,
    control: Option<&[f64]>,
) -> Result<GridDensity, GridError> {
    if model.dim_obs() != 1 {
        return Err(GridError::Length { expected: 1, got: model.dim_obs() });
    }
    let op = FpOperator::from_model(model, rho_hat.grid, control.unwrap_or(&[]))?;
    let h = observation_table(model, rho_hat, y);
    let mut out = rho_hat.clone();
    let mut scratch = FpScratch::default();
    op.advance(&mut out.values, 0.5 * dt, &mut scratch)?;

    let dx = out.dx();
    let mass: f64 = out.values.iter().sum::<f64>() * dx;
    let pi_h: f64 = out.values.iter().zip(&h).map(|(v, hi)| v * hi).sum::<f64>() * dx / mass;
    let var_h: f64 = out.values.iter().zip(&h).map(|(v, hi)| v * (hi - pi_h).powi(2)).sum::<f64>() * dx / mass;
    let di = delta_y - pi_h * dt;
    let quad = di * di - dt;
    for (v, hi) in out.values.iter_mut().zip(&h) {
        let eps = hi - pi_h;
        *v = (*v * (1.0 + eps * di + 0.5 * (eps * eps - var_h) * quad)).max(0.0);
    }
    op.advance(&mut out.values, 0.5 * dt, &mut scratch)?;
    let mass = out.mass();
    if !(mass > 0.0) {
        return Err(GridError::FilterCollapse(mass));
    }
    for v in &mut out.values {
        *v /= mass;
    }
    out.normalized = true;
    Ok(out)
}
