//! Generator and co-metric evaluated by finite differences on cell centres.

use super::Grid1D;
use crate::diffusion::DiffusionModel;

fn derivatives(grid: &Grid1D, f: &[f64], i: usize) -> (f64, f64) {
    let dx = grid.dx();
    ((f[i + 1] - f[i - 1]) / (2.0 * dx), (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dx * dx))
}

/// `Lf = v f′ + ½ Σ f″` at interior centres (end cells are left at zero).
pub fn generator_on_grid(model: &DiffusionModel, grid: &Grid1D, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 1..f.len() - 1 {
        let x = grid.center(i);
        let (d1, d2) = derivatives(grid, f, i);
        out[i] = model.drift_1d(x, &[]) * d1 + 0.5 * model.sigma_1d(x) * d2;
    }
    out
}

/// `Γ(f, g) = Σ f′ g′` at interior centres.
pub fn gamma_on_grid(model: &DiffusionModel, grid: &Grid1D, f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 1..f.len() - 1 {
        let (df, _) = derivatives(grid, f, i);
        let (dg, _) = derivatives(grid, g, i);
        out[i] = model.sigma_1d(grid.center(i)) * df * dg;
    }
    out
}
