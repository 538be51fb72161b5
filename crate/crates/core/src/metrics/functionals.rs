use super::MetricsError;
use crate::diffusion::{divergence_u, presets, DiffusionModel};
use crate::grid::{FpOperator, FpScratch, Grid1D, GridDensity, SCORE_GATE};

fn sigma_centres(model: &DiffusionModel, grid: &Grid1D) -> Vec<f64> {
    (0..grid.n_cells()).map(|i| model.sigma_1d(grid.center(i))).collect()
}

/// `a priori` Fisher trace `∫ ρ Σ (∂ₓ ln ρ)²`.
pub fn fisher_trace_unconditional(model: &DiffusionModel, rho: &GridDensity) -> f64 {
    rho.fisher_trace(&sigma_centres(model, &rho.grid))
}

/// `dH/dt = 𝔼[∇·u] + ½ 𝔼[Γ(ln ρ, ln ρ)]` by quadrature.
pub fn entropy_production_rate(model: &DiffusionModel, rho: &GridDensity) -> f64 {
    let g = rho.grid;
    let div: f64 = (0..g.n_cells()).map(|i| rho.values[i] * divergence_u(model, &[g.center(i)])).sum();
    div * g.dx() / rho.mass() + 0.5 * fisher_trace_unconditional(model, rho)
}

/// Rate of change of `D(ρ ‖ ρ_ss)` in two forms: the co-metric average
/// `−½ 𝔼[Γ(ln ρ/ρ_ss, ln ρ/ρ_ss)]` and the flux form `−2 ∫ J Σ⁻¹ J / ρ`.
///
/// The flux form uses `J = vρ − ½∂ₓ(Σρ) = −½Σρ ∂ₓ ln(ρ/ρ_ss)`, valid when
/// `ρ_ss` carries no flux (always the case in 1D with reflecting walls).
pub fn free_surprise_rate(
    model: &DiffusionModel,
    rho: &GridDensity,
    rho_ss: &GridDensity,
) -> Result<(f64, f64), MetricsError> {
    if rho.grid != rho_ss.grid {
        return Err(crate::grid::GridError::GridMismatch.into());
    }
    let g = rho.grid;
    let sigma = sigma_centres(model, &g);
    if let Some(i) = (0..g.n_cells()).find(|&i| !(sigma[i] > 0.0)) {
        return Err(MetricsError::SingularDiffusion(g.center(i)));
    }
    let gate = SCORE_GATE * rho.max_value();
    let mut gamma = 0.0;
    for i in 0..g.n_cells() {
        if rho.values[i] > gate {
            let rel = rho.score_cell(i) - rho_ss.score_cell(i);
            gamma += rho.values[i] * sigma[i] * rel * rel;
        }
    }
    let gamma_form = -0.5 * gamma * g.dx() / rho.mass();

    let op =
        FpOperator::from_parts(g, (0..=g.n_cells()).map(|i| model.drift_1d(g.face(i), &[])).collect(), sigma.clone());
    let j = op.fluxes(&rho.values);
    let mut flux = 0.0;
    for i in 0..g.n_cells() - 1 {
        let rho_f = 0.5 * (rho.values[i] + rho.values[i + 1]);
        if rho_f > gate {
            let sigma_f = 0.5 * (sigma[i] + sigma[i + 1]);
            flux += j[i + 1] * j[i + 1] / (rho_f * sigma_f);
        }
    }
    let flux_form = -2.0 * flux * g.dx() / rho.mass();
    Ok((gamma_form, flux_form))
}

/// Smallest eigenvalue of `Cov − J⁻¹` for the translational Fisher
/// information (identity weighting). In 1D this is `Var − 1/J`.
pub fn cramer_rao_check(rho: &GridDensity) -> Result<f64, MetricsError> {
    let j = rho.fisher_trace(&vec![1.0; rho.values.len()]);
    if !(j > 0.0 && j.is_finite()) {
        return Err(MetricsError::SingularFisher(j));
    }
    Ok(rho.variance() - 1.0 / j)
}

/// Runs the heat equation (`Σ = 1`) from `N(0, v0)` on `grid` and returns
/// the largest `|dH/dt − ½ J|` over `t_grid`, with `dH/dt` from a 5-point
/// central difference of step `1e−3`.
pub fn de_bruijn_check(v0: f64, t_grid: &[f64], grid: Grid1D) -> Result<f64, MetricsError> {
    const STEP: f64 = 1e-3;
    if t_grid.iter().any(|&t| t < 2.0 * STEP) {
        return Err(MetricsError::Config("de Bruijn sample times must be ≥ 2e−3".into()));
    }
    let model = presets::brownian(1.0, 0.0);
    let op = FpOperator::from_model(&model, grid, &[])?;
    let t_end = t_grid.iter().copied().fold(0.0, f64::max) + 2.0 * STEP;
    let n_steps = (t_end / STEP).round() as usize + 1;
    let mut rho = GridDensity::gaussian(grid, 0.0, v0);
    let mut scratch = FpScratch::default();
    let mut h = Vec::with_capacity(n_steps + 1);
    let mut half_j = Vec::with_capacity(n_steps + 1);
    let ones = vec![1.0; grid.n_cells()];
    for k in 0..=n_steps {
        if k > 0 {
            op.advance(&mut rho.values, STEP, &mut scratch)?;
        }
        h.push(rho.entropy());
        half_j.push(0.5 * rho.fisher_trace(&ones));
    }
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let k = (t / STEP).round() as usize;
        let dh = (h[k - 2] - 8.0 * h[k - 1] + 8.0 * h[k + 1] - h[k + 2]) / (12.0 * STEP);
        worst = worst.max((dh - half_j[k]).abs());
    }
    Ok(worst)
}
